#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "specwave/model.hpp"

namespace specwave
{

inline constexpr char kCheckpointMagic[4] = {'W', 'F', 'C', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// WFC1 layout, little-endian:
///   "WFC1", version u32,
///   payload = nx u32, nz u32, dl_x f64, dl_z f64, channels u32, layers u32,
///             modes_v u32, modes_h u32, groups u32, conditioning u8,
///             activation u8, pad 2, lift_width u32, eps_max f64, seed u64,
///             value_count u64, values f64[value_count] in declaration order,
///   crc32 u32 of the payload.
std::vector<std::uint8_t> encode_checkpoint(const nn::ModelConfig &cfg, std::span<const double> values);
nn::Parameters<double> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path &path, const nn::ModelConfig &cfg, std::span<const double> values);

template <typename T>
void save_checkpoint(const std::filesystem::path &path, const nn::Parameters<T> &params)
{
  const std::vector<double> wide(params.values.begin(), params.values.end());
  save_checkpoint(path, params.config, std::span<const double>(wide));
}

nn::Parameters<double> load_checkpoint(const std::filesystem::path &path);

}  // namespace specwave
