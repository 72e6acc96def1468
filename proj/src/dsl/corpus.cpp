#include "lhs/dsl/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace lhs::dsl {

void write_corpus(const std::string& path, const std::vector<CorpusEntry>& entries) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("corpus: cannot open '" + path + "' for writing");
  for (const auto& e : entries) {
    nlohmann::json j;
    j["id"] = program_id(e.program);
    j["task"] = task_name(e.program.task);
    j["tokens"] = serialize(e.program);
    j["source"] = e.source;
    if (e.score) {
      j["score"] = *e.score;
    } else {
      j["score"] = nullptr;
    }
    os << j.dump() << "\n";
  }
  if (!os) throw std::runtime_error("corpus: write failed for '" + path + "'");
}

std::vector<CorpusEntry> read_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("corpus: cannot open '" + path + "'");
  std::vector<CorpusEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    CorpusEntry e;
    e.program = parse_spellings(task_from_name(j.at("task").get<std::string>()),
                                j.at("tokens").get<std::vector<std::string>>());
    e.source = j.value("source", "seed");
    if (j.contains("score") && !j["score"].is_null()) e.score = j["score"].get<double>();
    const std::string want = j.at("id").get<std::string>();
    if (want != program_id(e.program)) {
      throw std::runtime_error("corpus: id mismatch at " + path + ":" + std::to_string(lineno) +
                               " (stored " + want + ", computed " + program_id(e.program) + ")");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_vocab_json(const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  auto& toks = j["tokens"] = nlohmann::json::array();
  for (int t = 0; t < tok::VOCAB; ++t) toks.push_back(token_spelling(t));
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("vocab: cannot open '" + path + "' for writing");
  os << j.dump(2) << "\n";
}

}  // namespace lhs::dsl
