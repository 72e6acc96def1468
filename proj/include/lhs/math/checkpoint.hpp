#pragma once

#include <map>
#include <string>

#include "lhs/math/adamw.hpp"

namespace lhs::math {

// Binary container: version byte, little-endian u64 header length, JSON
// header (names, shapes, kinds, step counter, metadata), then the raw
// little-endian double payloads in header order. Optimizer moments travel
// with the parameters so training can resume exactly.
void save_checkpoint(const std::string& path, const ParamSet& ps,
                     const std::map<std::string, std::string>& meta = {});

ParamSet load_checkpoint(const std::string& path,
                         std::map<std::string, std::string>* meta_out = nullptr);

}  // namespace lhs::math
