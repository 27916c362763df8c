#pragma once

// Checkpoint layout:
//
//   <root>/ckpt/step-<n>/meta.json    step, seed, rng position, sizes
//   <root>/ckpt/step-<n>/tensors.bin  params, adam m, adam v as consecutive
//                                     little-endian IEEE-754 doubles
//
// The sampling streams are counter-based (derived from seed and step), so
// the step number is the full RNG position.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mentra/error.hpp"
#include "mentra/optimizer.hpp"

namespace mentra {

inline constexpr std::string_view kCheckpointFormat = "mentra-ckpt-v1";

struct TrainState {
  std::vector<double> params;
  AdamState adam;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& root, std::int64_t step) {
  return root / "ckpt" / ("step-" + std::to_string(step));
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline void write_doubles(std::ofstream& out, const std::vector<double>& xs) {
  out.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

inline void read_doubles(std::ifstream& in, std::vector<double>& xs, std::size_t n) {
  xs.resize(n);
  in.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace detail

inline std::filesystem::path save_checkpoint(const std::filesystem::path& root, const TrainState& state) {
  const auto dir = checkpoint_path(root, state.step);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::CheckpointWriteFailure, "cannot create " + dir.string() + ": " + ec.message());

  const bool has_moments = !state.adam.m.empty();
  nlohmann::json meta = {
      {"format", kCheckpointFormat},
      {"step", state.step},
      {"seed", state.seed},
      {"rng_position", state.step},
      {"num_params", state.params.size()},
      {"adam_step", state.adam.step},
      {"has_moments", has_moments},
      {"tensors", {{"file", "tensors.bin"}, {"dtype", "f64le"}, {"order", {"params", "adam_m", "adam_v"}}}},
  };
  {
    std::ofstream bin(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw Error(Errc::CheckpointWriteFailure, "cannot open " + (dir / "tensors.bin").string());
    detail::write_doubles(bin, state.params);
    if (has_moments) {
      detail::write_doubles(bin, state.adam.m);
      detail::write_doubles(bin, state.adam.v);
    }
    if (!bin) throw Error(Errc::CheckpointWriteFailure, "short write to " + (dir / "tensors.bin").string());
  }
  std::ofstream js(dir / "meta.json", std::ios::trunc);
  if (!js) throw Error(Errc::CheckpointWriteFailure, "cannot open " + (dir / "meta.json").string());
  js << meta.dump(2) << '\n';
  if (!js) throw Error(Errc::CheckpointWriteFailure, "short write to " + (dir / "meta.json").string());
  return dir;
}

inline TrainState load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream js(dir / "meta.json");
  if (!js) throw Error(Errc::CheckpointReadFailure, "missing " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CheckpointReadFailure, std::string("bad meta.json: ") + e.what());
  }
  if (meta.value("format", "") != kCheckpointFormat)
    throw Error(Errc::CheckpointReadFailure, "unknown checkpoint format in " + dir.string());

  TrainState st;
  st.step = meta.at("step").get<std::int64_t>();
  st.seed = meta.at("seed").get<std::uint64_t>();
  st.adam.step = meta.at("adam_step").get<std::int64_t>();
  const auto n = meta.at("num_params").get<std::size_t>();
  const bool has_moments = meta.at("has_moments").get<bool>();

  std::ifstream bin(dir / "tensors.bin", std::ios::binary);
  if (!bin) throw Error(Errc::CheckpointReadFailure, "missing " + (dir / "tensors.bin").string());
  detail::read_doubles(bin, st.params, n);
  if (has_moments) {
    detail::read_doubles(bin, st.adam.m, n);
    detail::read_doubles(bin, st.adam.v, n);
  }
  if (!bin) throw Error(Errc::CheckpointReadFailure, "truncated tensors in " + dir.string());
  return st;
}

}  // namespace mentra
