#pragma once

// Versioned flat checkpoint file (little-endian):
//
//   magic "RISECKP1" | u32 version | u32 flags
//   actor  arch: 4 x i32 (vocab, embed, window, hidden)
//   critic arch: 4 x i32
//   u64 actor_param_count | u64 critic_param_count
//   u64 header_checksum (FNV-1a of everything above)
//   actor params (f64) | critic params (f64)
//   flags bit 0 -> trainer section: ref-actor params (f64),
//                  u64 trainer_seed, u64 next_iteration
//
// Loading rejects bad magic, version, checksum, or truncated payload.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rise/policy.hpp"
#include "rise/util.hpp"

namespace rise {

inline constexpr char kCheckpointMagic[8] = {'R', 'I', 'S', 'E', 'C', 'K', 'P', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ActorParams actor;
  CriticParams critic;
  bool has_trainer_state = false;
  ActorParams ref_actor;
  std::uint64_t trainer_seed = 0;
  std::uint64_t next_iteration = 0;
};

namespace detail {

template <typename T>
void put_raw(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get_raw(std::istream& in, const std::string& context) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw io_error("truncated checkpoint while reading " + context);
  }
  return v;
}

inline void put_arch(std::string& buf, const NetConfig& cfg) {
  put_raw<std::int32_t>(buf, cfg.vocab_size);
  put_raw<std::int32_t>(buf, cfg.embed_dim);
  put_raw<std::int32_t>(buf, cfg.window);
  put_raw<std::int32_t>(buf, cfg.hidden);
}

inline NetConfig get_arch(std::istream& in, const std::string& context) {
  NetConfig cfg;
  cfg.vocab_size = get_raw<std::int32_t>(in, context);
  cfg.embed_dim = get_raw<std::int32_t>(in, context);
  cfg.window = get_raw<std::int32_t>(in, context);
  cfg.hidden = get_raw<std::int32_t>(in, context);
  return cfg;
}

inline void write_params(std::ostream& out, const NetParams& p, const std::string& path) {
  out.write(reinterpret_cast<const char*>(p.flat.data()),
            static_cast<std::streamsize>(p.flat.size() * sizeof(double)));
  if (!out) throw io_error("failed writing parameters to " + path);
}

inline void read_params(std::istream& in, NetParams& p, const std::string& context) {
  if (!in.read(reinterpret_cast<char*>(p.flat.data()),
               static_cast<std::streamsize>(p.flat.size() * sizeof(double)))) {
    throw io_error("truncated checkpoint while reading " + context);
  }
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string header;
  header.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_raw<std::uint32_t>(header, kCheckpointVersion);
  detail::put_raw<std::uint32_t>(header, ckpt.has_trainer_state ? 1u : 0u);
  detail::put_arch(header, ckpt.actor.cfg);
  detail::put_arch(header, ckpt.critic.cfg);
  detail::put_raw<std::uint64_t>(header, ckpt.actor.param_count());
  detail::put_raw<std::uint64_t>(header, ckpt.critic.param_count());
  detail::put_raw<std::uint64_t>(header, fnv1a64(header.data(), header.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open checkpoint for writing: " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::write_params(out, ckpt.actor, path.string());
  detail::write_params(out, ckpt.critic, path.string());
  if (ckpt.has_trainer_state) {
    if (ckpt.ref_actor.cfg != ckpt.actor.cfg) {
      throw std::invalid_argument("save_checkpoint: ref actor architecture differs from actor");
    }
    detail::write_params(out, ckpt.ref_actor, path.string());
    std::string tail;
    detail::put_raw<std::uint64_t>(tail, ckpt.trainer_seed);
    detail::put_raw<std::uint64_t>(tail, ckpt.next_iteration);
    out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
  }
  if (!out) throw io_error("failed writing checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path.string());

  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw io_error("not a checkpoint file (bad magic): " + path.string());
  }
  // Re-hash the header as we parse it to validate the stored checksum.
  std::string header(magic, sizeof(magic));
  const auto version = detail::get_raw<std::uint32_t>(in, "version");
  const auto flags = detail::get_raw<std::uint32_t>(in, "flags");
  detail::put_raw<std::uint32_t>(header, version);
  detail::put_raw<std::uint32_t>(header, flags);
  if (version != kCheckpointVersion) {
    throw io_error("unsupported checkpoint version " + std::to_string(version) + " in " +
                   path.string());
  }
  const NetConfig actor_cfg = detail::get_arch(in, "actor architecture");
  const NetConfig critic_cfg = detail::get_arch(in, "critic architecture");
  detail::put_arch(header, actor_cfg);
  detail::put_arch(header, critic_cfg);
  const auto actor_count = detail::get_raw<std::uint64_t>(in, "actor parameter count");
  const auto critic_count = detail::get_raw<std::uint64_t>(in, "critic parameter count");
  detail::put_raw<std::uint64_t>(header, actor_count);
  detail::put_raw<std::uint64_t>(header, critic_count);
  const auto stored = detail::get_raw<std::uint64_t>(in, "header checksum");
  if (stored != fnv1a64(header.data(), header.size())) {
    throw io_error("checkpoint header checksum mismatch: " + path.string());
  }

  Checkpoint ckpt;
  ckpt.actor.cfg = actor_cfg;
  ckpt.actor.outputs = actor_cfg.vocab_size;
  ckpt.critic.cfg = critic_cfg;
  ckpt.critic.outputs = 1;
  if (actor_count != ckpt.actor.param_count() || critic_count != ckpt.critic.param_count()) {
    throw io_error("checkpoint parameter counts do not match architecture: " + path.string());
  }
  ckpt.actor.flat.resize(ckpt.actor.param_count());
  ckpt.critic.flat.resize(ckpt.critic.param_count());
  detail::read_params(in, ckpt.actor, "actor parameters");
  detail::read_params(in, ckpt.critic, "critic parameters");
  if (flags & 1u) {
    ckpt.has_trainer_state = true;
    ckpt.ref_actor.cfg = actor_cfg;
    ckpt.ref_actor.outputs = actor_cfg.vocab_size;
    ckpt.ref_actor.flat.resize(ckpt.ref_actor.param_count());
    detail::read_params(in, ckpt.ref_actor, "reference actor parameters");
    ckpt.trainer_seed = detail::get_raw<std::uint64_t>(in, "trainer seed");
    ckpt.next_iteration = detail::get_raw<std::uint64_t>(in, "iteration index");
  }
  return ckpt;
}

// Explicit mismatch error naming both shapes.
inline void require_same_arch(const NetConfig& expected, const NetConfig& actual,
                              const std::string& what) {
  if (!(expected == actual)) {
    throw config_error(what + ": architecture mismatch, expected " + expected.describe() +
                       " but checkpoint has " + actual.describe());
  }
}

}  // namespace rise
