#include "lhs/math/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace lhs::math {

namespace {

constexpr std::uint8_t kVersion = 1;

void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

const std::map<std::string, Tensor>* bucket(const ParamSet& ps, const std::string& kind) {
  if (kind == "param") return &ps.params;
  if (kind == "m") return &ps.m;
  if (kind == "v") return &ps.v;
  return nullptr;
}

std::map<std::string, Tensor>* bucket(ParamSet& ps, const std::string& kind) {
  return const_cast<std::map<std::string, Tensor>*>(
      bucket(static_cast<const ParamSet&>(ps), kind));
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& ps,
                     const std::map<std::string, std::string>& meta) {
  nlohmann::json header;
  header["step"] = ps.step;
  header["meta"] = meta;
  auto& entries = header["entries"] = nlohmann::json::array();
  for (const char* kind : {"param", "m", "v"}) {
    for (const auto& [name, t] : *bucket(ps, kind)) {
      entries.push_back({{"name", name}, {"kind", kind}, {"shape", t.shape}});
    }
  }
  const std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.put(static_cast<char>(kVersion));
  write_u64_le(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const char* kind : {"param", "m", "v"}) {
    for (const auto& [name, t] : *bucket(ps, kind)) {
      (void)name;
      os.write(reinterpret_cast<const char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

ParamSet load_checkpoint(const std::string& path, std::map<std::string, std::string>* meta_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  const int version = is.get();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                             " in '" + path + "'");
  }
  const std::uint64_t hlen = read_u64_le(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw std::runtime_error("checkpoint: truncated header in '" + path + "'");
  nlohmann::json header = nlohmann::json::parse(hs);

  ParamSet ps;
  ps.step = header.at("step").get<std::uint64_t>();
  if (meta_out && header.contains("meta")) {
    *meta_out = header["meta"].get<std::map<std::string, std::string>>();
  }
  for (const auto& e : header.at("entries")) {
    const std::string name = e.at("name").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated payload in '" + path + "'");
    auto* b = bucket(ps, kind);
    if (!b) throw std::runtime_error("checkpoint: unknown entry kind '" + kind + "'");
    (*b)[name] = std::move(t);
  }
  return ps;
}

}  // namespace lhs::math
