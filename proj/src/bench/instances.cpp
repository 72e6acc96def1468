#include "lhs/bench/instances.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace lhs::bench {

double dist(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

const char* family_name(KnapsackFamily f) {
  switch (f) {
    case KnapsackFamily::UNCORRELATED: return "UNCORRELATED";
    case KnapsackFamily::WEAK: return "WEAK";
    case KnapsackFamily::STRONG: return "STRONG";
  }
  return "?";
}

KnapsackFamily family_from_name(const std::string& s) {
  if (s == "UNCORRELATED") return KnapsackFamily::UNCORRELATED;
  if (s == "WEAK") return KnapsackFamily::WEAK;
  if (s == "STRONG") return KnapsackFamily::STRONG;
  throw std::invalid_argument("unknown knapsack family '" + s + "'");
}

TspInstance gen_tsp(std::size_t n, lhs::math::Rng& rng) {
  if (n < 2) throw std::invalid_argument("gen_tsp: need at least 2 cities");
  TspInstance inst;
  inst.seed = rng.seed();
  inst.coords.resize(n);
  for (auto& p : inst.coords) {
    p.x = rng.uniform();
    p.y = rng.uniform();
  }
  return inst;
}

CvrpInstance gen_cvrp(std::size_t n, int capacity, lhs::math::Rng& rng) {
  if (n == 0 || capacity < 9) throw std::invalid_argument("gen_cvrp: bad size or capacity");
  CvrpInstance inst;
  inst.seed = rng.seed();
  inst.capacity = capacity;
  inst.depot = {rng.uniform(), rng.uniform()};
  inst.customers.resize(n);
  inst.demands.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    inst.customers[i] = {rng.uniform(), rng.uniform()};
    inst.demands[i] = static_cast<int>(rng.uniform_int(1, 9));
  }
  return inst;
}

KnapsackInstance gen_knapsack(KnapsackFamily family, std::size_t n, int capacity,
                              lhs::math::Rng& rng) {
  if (n == 0 || capacity <= 0) throw std::invalid_argument("gen_knapsack: bad size or capacity");
  KnapsackInstance inst;
  inst.seed = rng.seed();
  inst.capacity = capacity;
  inst.family = family;
  inst.weights.resize(n);
  inst.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int w = static_cast<int>(rng.uniform_int(1, 100));
    inst.weights[i] = w;
    switch (family) {
      case KnapsackFamily::UNCORRELATED:
        inst.values[i] = static_cast<int>(rng.uniform_int(1, 100));
        break;
      case KnapsackFamily::WEAK:
        inst.values[i] = static_cast<int>(rng.uniform_int(std::max(1, w - 10), w + 10));
        break;
      case KnapsackFamily::STRONG:
        inst.values[i] = w + 10;
        break;
    }
  }
  return inst;
}

ObpInstance gen_obp(std::size_t length, lhs::math::Rng& rng) {
  if (length == 0) throw std::invalid_argument("gen_obp: empty instance");
  ObpInstance inst;
  inst.seed = rng.seed();
  inst.sizes.resize(length);
  for (auto& s : inst.sizes) {
    // Weibull(shape 3, scale 45) via inverse CDF.
    const double u = rng.uniform();
    const double x = 45.0 * std::pow(-std::log(1.0 - u), 1.0 / 3.0);
    s = static_cast<int>(std::lround(x));
    if (s < 1) s = 1;
    if (s > 100) s = 100;
  }
  return inst;
}

std::size_t Benchmark::size() const {
  switch (task) {
    case dsl::Task::TSP: return tsp.size();
    case dsl::Task::CVRP: return cvrp.size();
    case dsl::Task::KNAPSACK: return knapsack.size();
    case dsl::Task::OBP: return obp.size();
  }
  return 0;
}

namespace {

nlohmann::json point_json(const Point& p) { return nlohmann::json::array({p.x, p.y}); }

Point point_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void write_benchmark_json(const std::string& path, const Benchmark& b) {
  nlohmann::json j;
  j["task"] = dsl::task_name(b.task);
  j["timeout_seconds"] = b.timeout_seconds;
  auto& arr = j["instances"] = nlohmann::json::array();
  switch (b.task) {
    case dsl::Task::TSP:
      for (const auto& inst : b.tsp) {
        nlohmann::json o;
        o["seed"] = inst.seed;
        o["n"] = inst.n();
        auto& c = o["coords"] = nlohmann::json::array();
        for (const auto& p : inst.coords) c.push_back(point_json(p));
        arr.push_back(std::move(o));
      }
      break;
    case dsl::Task::CVRP:
      for (const auto& inst : b.cvrp) {
        nlohmann::json o;
        o["seed"] = inst.seed;
        o["n"] = inst.n();
        o["capacity"] = inst.capacity;
        o["depot"] = point_json(inst.depot);
        auto& c = o["customers"] = nlohmann::json::array();
        for (const auto& p : inst.customers) c.push_back(point_json(p));
        o["demands"] = inst.demands;
        arr.push_back(std::move(o));
      }
      break;
    case dsl::Task::KNAPSACK:
      for (const auto& inst : b.knapsack) {
        nlohmann::json o;
        o["seed"] = inst.seed;
        o["n"] = inst.n();
        o["capacity"] = inst.capacity;
        o["family"] = family_name(inst.family);
        o["weights"] = inst.weights;
        o["values"] = inst.values;
        arr.push_back(std::move(o));
      }
      break;
    case dsl::Task::OBP:
      for (const auto& inst : b.obp) {
        nlohmann::json o;
        o["seed"] = inst.seed;
        o["n"] = inst.n();
        o["capacity"] = inst.capacity;
        o["sizes"] = inst.sizes;
        arr.push_back(std::move(o));
      }
      break;
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("benchmark: cannot open '" + path + "' for writing");
  os << j.dump() << "\n";
}

Benchmark read_benchmark_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("benchmark: cannot open '" + path + "'");
  nlohmann::json j;
  is >> j;
  Benchmark b;
  b.task = dsl::task_from_name(j.at("task").get<std::string>());
  b.timeout_seconds = j.value("timeout_seconds", 60.0);
  for (const auto& o : j.at("instances")) {
    switch (b.task) {
      case dsl::Task::TSP: {
        TspInstance inst;
        inst.seed = o.at("seed").get<std::uint64_t>();
        for (const auto& p : o.at("coords")) inst.coords.push_back(point_from(p));
        b.tsp.push_back(std::move(inst));
        break;
      }
      case dsl::Task::CVRP: {
        CvrpInstance inst;
        inst.seed = o.at("seed").get<std::uint64_t>();
        inst.capacity = o.at("capacity").get<int>();
        inst.depot = point_from(o.at("depot"));
        for (const auto& p : o.at("customers")) inst.customers.push_back(point_from(p));
        inst.demands = o.at("demands").get<std::vector<int>>();
        b.cvrp.push_back(std::move(inst));
        break;
      }
      case dsl::Task::KNAPSACK: {
        KnapsackInstance inst;
        inst.seed = o.at("seed").get<std::uint64_t>();
        inst.capacity = o.at("capacity").get<int>();
        inst.family = family_from_name(o.at("family").get<std::string>());
        inst.weights = o.at("weights").get<std::vector<int>>();
        inst.values = o.at("values").get<std::vector<int>>();
        b.knapsack.push_back(std::move(inst));
        break;
      }
      case dsl::Task::OBP: {
        ObpInstance inst;
        inst.seed = o.at("seed").get<std::uint64_t>();
        inst.capacity = o.at("capacity").get<int>();
        inst.sizes = o.at("sizes").get<std::vector<int>>();
        b.obp.push_back(std::move(inst));
        break;
      }
    }
  }
  return b;
}

}  // namespace lhs::bench
