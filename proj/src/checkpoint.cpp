#include "specwave/checkpoint.hpp"

#include <cstring>

#include "specwave/binio.hpp"
#include "specwave/error.hpp"

namespace specwave
{

std::vector<std::uint8_t> encode_checkpoint(const nn::ModelConfig &cfg, std::span<const double> values)
{
  cfg.validate();
  if (values.size() != static_cast<std::size_t>(nn::param_count(cfg)))
  {
    throw ShapeMismatch("parameter count does not match the model config");
  }
  binio::Writer w;
  for (char c : kCheckpointMagic)
  {
    w.put(static_cast<std::uint8_t>(c));
  }
  w.put(kCheckpointVersion);
  const std::size_t payload_start = w.size();
  w.put(static_cast<std::uint32_t>(cfg.grid.nx));
  w.put(static_cast<std::uint32_t>(cfg.grid.nz));
  w.put(cfg.grid.dl_x);
  w.put(cfg.grid.dl_z);
  w.put(static_cast<std::uint32_t>(cfg.channels));
  w.put(static_cast<std::uint32_t>(cfg.layers));
  w.put(static_cast<std::uint32_t>(cfg.modes_v));
  w.put(static_cast<std::uint32_t>(cfg.modes_h));
  w.put(static_cast<std::uint32_t>(cfg.groups));
  w.put(static_cast<std::uint8_t>(cfg.conditioning));
  w.put(static_cast<std::uint8_t>(cfg.activation));
  w.pad(2);
  w.put(static_cast<std::uint32_t>(cfg.lift_width));
  w.put(cfg.eps_max);
  w.put(cfg.seed);
  w.put(static_cast<std::uint64_t>(values.size()));
  for (double v : values)
  {
    w.put(v);
  }
  const auto &bytes = w.bytes();
  w.put(binio::crc32(std::span(bytes).subspan(payload_start)));
  return std::move(w.bytes());
}

nn::Parameters<double> decode_checkpoint(std::span<const std::uint8_t> bytes)
{
  binio::Reader r(bytes, "checkpoint");
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0)
  {
    throw BadMagicError("not a WFC1 checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
  {
    throw VersionMismatchError("checkpoint version " + std::to_string(version) + " not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t payload_start = r.position();
  nn::ModelConfig cfg;
  cfg.grid.nx = static_cast<int>(r.get<std::uint32_t>());
  cfg.grid.nz = static_cast<int>(r.get<std::uint32_t>());
  cfg.grid.dl_x = r.get<double>();
  cfg.grid.dl_z = r.get<double>();
  cfg.channels = static_cast<int>(r.get<std::uint32_t>());
  cfg.layers = static_cast<int>(r.get<std::uint32_t>());
  cfg.modes_v = static_cast<int>(r.get<std::uint32_t>());
  cfg.modes_h = static_cast<int>(r.get<std::uint32_t>());
  cfg.groups = static_cast<int>(r.get<std::uint32_t>());
  const auto cond = r.get<std::uint8_t>();
  const auto act = r.get<std::uint8_t>();
  r.skip(2);
  cfg.lift_width = static_cast<int>(r.get<std::uint32_t>());
  cfg.eps_max = r.get<double>();
  cfg.seed = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  if (cond > 1 || act != 0)
  {
    throw FormatError("checkpoint holds an unknown conditioning or activation code");
  }
  cfg.conditioning = static_cast<nn::Conditioning>(cond);
  cfg.activation = nn::Activation::gelu;

  const std::uint64_t need = count * 8 + 4;
  if (r.remaining() < need)
  {
    throw TruncatedError("checkpoint truncated: expected " + std::to_string(count) + " values, found " +
                             std::to_string(r.remaining() >= 4 ? (r.remaining() - 4) / 8 : 0),
                         count, r.remaining() >= 4 ? (r.remaining() - 4) / 8 : 0);
  }
  nn::Parameters<double> p{cfg, std::vector<double>(count)};
  for (double &v : p.values)
  {
    v = r.get<double>();
  }
  const std::uint32_t expect = binio::crc32(bytes.subspan(payload_start, r.position() - payload_start));
  const auto stored = r.get<std::uint32_t>();
  if (stored != expect)
  {
    throw ChecksumError("checkpoint checksum mismatch");
  }
  if (r.remaining() != 0)
  {
    throw FormatError("trailing bytes after checkpoint");
  }
  try
  {
    cfg.validate();
  }
  catch (const InvalidArgument &e)
  {
    throw FileShapeError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (count != static_cast<std::uint64_t>(nn::param_count(cfg)))
  {
    throw FileShapeError("checkpoint value count " + std::to_string(count) + " does not match its config (" +
                         std::to_string(nn::param_count(cfg)) + ")");
  }
  return p;
}

void save_checkpoint(const std::filesystem::path &path, const nn::ModelConfig &cfg, std::span<const double> values)
{
  binio::write_file(path, encode_checkpoint(cfg, values));
}

nn::Parameters<double> load_checkpoint(const std::filesystem::path &path)
{
  return decode_checkpoint(binio::read_file(path));
}

}  // namespace specwave
