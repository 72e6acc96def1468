#include "lhs/models/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "lhs/dsl/vocab.hpp"
#include "lhs/math/checkpoint.hpp"
#include "lhs/math/graph.hpp"

namespace lhs::models {

namespace {

using math::Graph;
using math::Tensor;

using LeafMap = std::map<std::string, Graph::Id>;

LeafMap leaves(Graph& g, const math::ParamSet& ps, bool needs_grad) {
  LeafMap ids;
  for (const auto& [name, t] : ps.params) ids[name] = g.leaf(t, needs_grad);
  return ids;
}

std::string blk(std::size_t b, const char* rest) {
  return "blk" + std::to_string(b) + "." + rest;
}

void check_model_config(const ModelConfig& c) {
  if (c.vocab < 4 || c.embed == 0 || c.latent == 0 || c.width == 0 || c.ffn_hidden == 0 ||
      c.context_tokens == 0 || c.families == 0 || c.prompt_tokens == 0 || c.max_len == 0) {
    throw std::invalid_argument("models: zero-sized dimension in config");
  }
  if (c.heads == 0 || c.width % c.heads != 0) {
    throw std::invalid_argument("models: width must divide evenly into heads");
  }
  if (c.dropout < 0.0 || c.dropout >= 1.0) {
    throw std::invalid_argument("models: dropout must lie in [0, 1)");
  }
}

void check_tokens(const std::vector<int>& tokens, const ModelConfig& cfg, const char* who) {
  if (tokens.size() > cfg.max_len) {
    throw std::invalid_argument(std::string(who) + ": sequence of " +
                                std::to_string(tokens.size()) + " tokens exceeds max_len " +
                                std::to_string(cfg.max_len));
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab) {
      throw std::invalid_argument(std::string(who) + ": token id " + std::to_string(t) +
                                  " outside the vocabulary");
    }
  }
}

void check_family(std::size_t family, const ModelConfig& cfg, const char* who) {
  if (family >= cfg.families) {
    throw std::invalid_argument(std::string(who) + ": context family " + std::to_string(family) +
                                " out of range");
  }
}

Graph::Id rmsnorm(Graph& g, Graph::Id x, Graph::Id gain) {
  auto ms = g.mean_axis(g.mul(x, x), 1);
  auto rms = g.exp_(g.scale(g.log_(g.add(ms, g.constant(1e-6))), 0.5));
  return g.mul(g.pdiv(x, rms), gain);
}

constexpr Graph::Id kNoMask = static_cast<Graph::Id>(-1);

Graph::Id mhsa(Graph& g, Graph::Id x, Graph::Id wq, Graph::Id wk, Graph::Id wv, Graph::Id wo,
               std::size_t heads, Graph::Id mask, double rate, math::Rng* rng, bool training) {
  const std::size_t width = g.val(x).cols();
  const std::size_t hd = width / heads;
  auto q = g.matmul(x, wq);
  auto k = g.matmul(x, wk);
  auto v = g.matmul(x, wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Graph::Id> ctx;
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = g.slice_cols(q, h * hd, (h + 1) * hd);
    auto kh = g.slice_cols(k, h * hd, (h + 1) * hd);
    auto vh = g.slice_cols(v, h * hd, (h + 1) * hd);
    auto scores = g.scale(g.matmul(qh, kh, false, true), inv_sqrt);
    if (mask != kNoMask) scores = g.add(scores, mask);
    ctx.push_back(g.matmul(g.softmax(scores), vh));
  }
  auto out = g.matmul(g.concat(ctx, 1), wo);
  if (training) out = g.dropout(out, rate, *rng, true);
  return out;
}

// Attention rows may only look left; future positions get -1e9 before the
// softmax, which underflows to an exact zero weight.
Tensor causal_mask(std::size_t s) {
  Tensor m({s, s});
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) m.data[i * s + j] = -1e9;
  }
  return m;
}

Graph::Id decoder_block(Graph& g, const LeafMap& p, std::size_t b, Graph::Id x, Graph::Id mask,
                        const ModelConfig& cfg, math::Rng* rng, bool training) {
  auto att = mhsa(g, rmsnorm(g, x, p.at(blk(b, "n1.g"))), p.at(blk(b, "wq")), p.at(blk(b, "wk")),
                  p.at(blk(b, "wv")), p.at(blk(b, "wo")), cfg.heads, mask, cfg.dropout, rng,
                  training);
  x = g.add(x, att);
  auto n2 = rmsnorm(g, x, p.at(blk(b, "n2.g")));
  auto h = g.relu(g.add(g.matmul(n2, p.at(blk(b, "ffn.w1"))), p.at(blk(b, "ffn.b1"))));
  auto f = g.add(g.matmul(h, p.at(blk(b, "ffn.w2"))), p.at(blk(b, "ffn.b2")));
  if (training) f = g.dropout(f, cfg.dropout, *rng, true);
  return g.add(x, f);
}

// Logits [T+1, vocab] for inputs [BOS, tokens...] sitting behind the family
// context rows and the given prefix rows. Positions index the token region
// only; context and prefix rows are learned whole.
Graph::Id decoder_logits(Graph& g, const LeafMap& p, const ModelConfig& cfg, std::size_t family,
                         Graph::Id prefix, const std::vector<int>& tokens, math::Rng* rng,
                         bool training) {
  std::vector<int> ids_in;
  ids_in.reserve(tokens.size() + 1);
  ids_in.push_back(dsl::tok::BOS);
  ids_in.insert(ids_in.end(), tokens.begin(), tokens.end());
  auto tok_rows = g.add(g.embedding(p.at("tok.emb"), ids_in),
                        g.slice_rows(p.at("pos.emb"), 0, ids_in.size()));
  auto x = g.concat({p.at("ctx" + std::to_string(family)), prefix, tok_rows}, 0);
  const std::size_t s = g.val(x).rows();
  auto mask = g.leaf(causal_mask(s));
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    x = decoder_block(g, p, b, x, mask, cfg, rng, training);
  }
  auto region = g.slice_rows(x, s - ids_in.size(), s);
  auto normed = rmsnorm(g, region, p.at("out.norm.g"));
  return g.add(g.matmul(normed, p.at("out.w")), p.at("out.b"));
}

Graph::Id nll_of_logits(Graph& g, Graph::Id logits, const std::vector<int>& tokens) {
  std::vector<int> targets(tokens);
  targets.push_back(dsl::tok::EOS);
  auto logp = g.log_(g.softmax(logits));
  return g.neg(g.mean(g.gather_cols(logp, targets)));
}

Graph::Id encoder_latent(Graph& g, const LeafMap& p, const std::vector<int>& tokens) {
  auto pooled = g.mean_axis(g.embedding(p.at("tok.emb"), tokens), 0);
  auto h = g.lrelu(g.add(g.matmul(pooled, p.at("proj.w1")), p.at("proj.b1")), 0.2);
  return g.add(g.matmul(h, p.at("proj.w2")), p.at("proj.b2"));
}

Graph::Id bottleneck_row(Graph& g, const LeafMap& p, Graph::Id z) {
  return g.add(g.matmul(z, p.at("bneck.w")), p.at("bneck.b"));
}

Graph::Id mapper_rows(Graph& g, const LeafMap& p, const ModelConfig& cfg, Graph::Id z,
                      math::Rng* rng, bool training) {
  auto flat = g.add(g.matmul(z, p.at("in.w")), p.at("in.b"));
  std::vector<Graph::Id> chunks;
  for (std::size_t k = 0; k < cfg.prompt_tokens; ++k) {
    chunks.push_back(g.slice_cols(flat, k * cfg.width, (k + 1) * cfg.width));
  }
  auto x = g.add(g.concat(chunks, 0), p.at("pos"));
  auto att = mhsa(g, rmsnorm(g, x, p.at("n1.g")), p.at("wq"), p.at("wk"), p.at("wv"), p.at("wo"),
                  cfg.heads, kNoMask, cfg.dropout, rng, training);
  x = g.add(x, att);
  auto n2 = rmsnorm(g, x, p.at("n2.g"));
  return g.add(g.matmul(n2, p.at("up.w")), p.at("up.b"));
}

Tensor z_row(const Tensor& z, std::size_t latent, const char* who) {
  if (z.shape.size() == 2 && z.rows() == 1 && z.cols() == latent) return z;
  if (z.shape.size() != 1 || z.data.size() != latent) {
    throw std::invalid_argument(std::string(who) + ": expected a latent vector of length " +
                                std::to_string(latent) + ", got " + math::shape_str(z.shape));
  }
  return Tensor::from({1, latent}, z.data);
}

int sample_row(const std::vector<double>& logits, double temperature, double top_p,
               math::Rng& rng) {
  const std::size_t n = logits.size();
  if (temperature <= 0.0) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  std::vector<double> p(n);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p[a] != p[b] ? p[a] > p[b] : a < b;
  });
  // Nucleus: smallest prefix of the sorted mass reaching top_p; the element
  // crossing the threshold stays in.
  std::size_t kept = n;
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += p[order[i]];
    if (cum >= top_p) {
      kept = i + 1;
      break;
    }
  }
  double kept_sum = 0.0;
  for (std::size_t i = 0; i < kept; ++i) kept_sum += p[order[i]];
  double r = rng.uniform() * kept_sum;
  for (std::size_t i = 0; i < kept; ++i) {
    r -= p[order[i]];
    if (r <= 0.0) return static_cast<int>(order[i]);
  }
  return static_cast<int>(order[kept - 1]);
}

std::vector<int> decode_with_prefix(const DecoderModel& m, std::size_t family,
                                    const Tensor& prefix, double temperature, double top_p,
                                    math::Rng& rng, std::size_t max_len) {
  check_family(family, m.cfg, "decode");
  const std::size_t cap = std::min(max_len, m.cfg.max_len);
  std::vector<int> out;
  while (out.size() < cap) {
    Graph g;
    auto p = leaves(g, m.params, false);
    auto logits = decoder_logits(g, p, m.cfg, family, g.leaf(prefix), out, nullptr, false);
    const Tensor& lv = g.val(logits);
    std::vector<double> last(lv.data.end() - m.cfg.vocab, lv.data.end());
    const int next = sample_row(last, temperature, top_p, rng);
    if (next == dsl::tok::EOS) break;
    out.push_back(next);
  }
  return out;
}

// A parameter can sit out a tape (a context family that was not drawn); its
// gradient buffer stays empty and contributes nothing.
void accumulate_grads(std::map<std::string, Tensor>& acc, Graph& g, const LeafMap& p, double w) {
  for (const auto& [name, id] : p) {
    const Tensor& t = g.grad(id);
    if (t.data.empty()) continue;
    Tensor& slot = acc.at(name);
    for (std::size_t i = 0; i < t.data.size(); ++i) slot.data[i] += w * t.data[i];
  }
}

std::map<std::string, Tensor> zero_grads(const math::ParamSet& ps) {
  std::map<std::string, Tensor> acc;
  for (const auto& [name, t] : ps.params) acc[name] = Tensor(t.shape);
  return acc;
}

std::map<std::string, std::string> config_meta(const ModelConfig& c, const char* kind,
                                               bool frozen) {
  std::map<std::string, std::string> meta;
  meta["kind"] = kind;
  meta["vocab"] = std::to_string(c.vocab);
  meta["embed"] = std::to_string(c.embed);
  meta["latent"] = std::to_string(c.latent);
  meta["width"] = std::to_string(c.width);
  meta["heads"] = std::to_string(c.heads);
  meta["blocks"] = std::to_string(c.blocks);
  meta["ffn_hidden"] = std::to_string(c.ffn_hidden);
  meta["context_tokens"] = std::to_string(c.context_tokens);
  meta["families"] = std::to_string(c.families);
  meta["prompt_tokens"] = std::to_string(c.prompt_tokens);
  meta["dropout"] = std::to_string(c.dropout);
  meta["max_len"] = std::to_string(c.max_len);
  meta["frozen"] = frozen ? "1" : "0";
  return meta;
}

ModelConfig config_from_meta(const std::map<std::string, std::string>& meta, const char* kind,
                             bool* frozen_out) {
  if (meta.at("kind") != kind) {
    throw std::runtime_error(std::string("load: checkpoint kind is ") + meta.at("kind") +
                             ", expected " + kind);
  }
  ModelConfig c;
  c.vocab = std::stoull(meta.at("vocab"));
  c.embed = std::stoull(meta.at("embed"));
  c.latent = std::stoull(meta.at("latent"));
  c.width = std::stoull(meta.at("width"));
  c.heads = std::stoull(meta.at("heads"));
  c.blocks = std::stoull(meta.at("blocks"));
  c.ffn_hidden = std::stoull(meta.at("ffn_hidden"));
  c.context_tokens = std::stoull(meta.at("context_tokens"));
  c.families = std::stoull(meta.at("families"));
  c.prompt_tokens = std::stoull(meta.at("prompt_tokens"));
  c.dropout = std::stod(meta.at("dropout"));
  c.max_len = std::stoull(meta.at("max_len"));
  if (frozen_out != nullptr) *frozen_out = meta.at("frozen") == "1";
  check_model_config(c);
  return c;
}

// Joint training works on one merged parameter set; these move the pieces
// in and out of it.
math::ParamSet merge_prefixed(const math::ParamSet& enc, const math::ParamSet& dec) {
  math::ParamSet joint;
  for (const auto& [name, t] : enc.params) joint.params["enc." + name] = t;
  for (const auto& [name, t] : dec.params) joint.params["dec." + name] = t;
  return joint;
}

math::ParamSet extract_prefixed(const math::ParamSet& joint, const std::string& prefix) {
  math::ParamSet out;
  for (const auto& [name, t] : joint.params) {
    if (name.rfind(prefix, 0) == 0) out.params[name.substr(prefix.size())] = t;
  }
  return out;
}

LeafMap strip_prefix(const LeafMap& all, const std::string& prefix) {
  LeafMap out;
  for (const auto& [name, id] : all) {
    if (name.rfind(prefix, 0) == 0) out[name.substr(prefix.size())] = id;
  }
  return out;
}

}  // namespace

EncoderModel make_encoder(const ModelConfig& cfg, math::Rng& rng) {
  check_model_config(cfg);
  EncoderModel m;
  m.cfg = cfg;
  auto& ps = m.params;
  ps["tok.emb"] = math::randn_tensor({cfg.vocab, cfg.embed}, rng, 0.02);
  ps["proj.w1"] = math::xavier_tensor(cfg.embed, cfg.latent, rng);
  ps["proj.b1"] = Tensor({1, cfg.latent});
  ps["proj.w2"] = math::xavier_tensor(cfg.latent, cfg.latent, rng);
  ps["proj.b2"] = Tensor({1, cfg.latent});
  return m;
}

DecoderModel make_decoder(const ModelConfig& cfg, math::Rng& rng) {
  check_model_config(cfg);
  DecoderModel m;
  m.cfg = cfg;
  auto& ps = m.params;
  ps["tok.emb"] = math::randn_tensor({cfg.vocab, cfg.width}, rng, 0.02);
  ps["pos.emb"] = math::randn_tensor({cfg.max_len + 1, cfg.width}, rng, 0.02);
  for (std::size_t f = 0; f < cfg.families; ++f) {
    ps["ctx" + std::to_string(f)] = math::randn_tensor({cfg.context_tokens, cfg.width}, rng, 0.02);
  }
  ps["bneck.w"] = math::xavier_tensor(cfg.latent, cfg.width, rng);
  ps["bneck.b"] = Tensor({1, cfg.width});
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    ps[blk(b, "n1.g")] = Tensor({1, cfg.width}, 1.0);
    ps[blk(b, "wq")] = math::xavier_tensor(cfg.width, cfg.width, rng);
    ps[blk(b, "wk")] = math::xavier_tensor(cfg.width, cfg.width, rng);
    ps[blk(b, "wv")] = math::xavier_tensor(cfg.width, cfg.width, rng);
    ps[blk(b, "wo")] = math::xavier_tensor(cfg.width, cfg.width, rng);
    ps[blk(b, "n2.g")] = Tensor({1, cfg.width}, 1.0);
    ps[blk(b, "ffn.w1")] = math::xavier_tensor(cfg.width, cfg.ffn_hidden, rng);
    ps[blk(b, "ffn.b1")] = Tensor({1, cfg.ffn_hidden});
    ps[blk(b, "ffn.w2")] = math::xavier_tensor(cfg.ffn_hidden, cfg.width, rng);
    ps[blk(b, "ffn.b2")] = Tensor({1, cfg.width});
  }
  ps["out.norm.g"] = Tensor({1, cfg.width}, 1.0);
  ps["out.w"] = math::xavier_tensor(cfg.width, cfg.vocab, rng);
  ps["out.b"] = Tensor({1, cfg.vocab});
  return m;
}

MapperModel make_mapper(const ModelConfig& cfg, math::Rng& rng) {
  check_model_config(cfg);
  MapperModel m;
  m.cfg = cfg;
  auto& ps = m.params;
  ps["in.w"] = math::xavier_tensor(cfg.latent, cfg.prompt_tokens * cfg.width, rng);
  ps["in.b"] = Tensor({1, cfg.prompt_tokens * cfg.width});
  ps["pos"] = math::randn_tensor({cfg.prompt_tokens, cfg.width}, rng, 0.02);
  ps["n1.g"] = Tensor({1, cfg.width}, 1.0);
  ps["wq"] = math::xavier_tensor(cfg.width, cfg.width, rng);
  ps["wk"] = math::xavier_tensor(cfg.width, cfg.width, rng);
  ps["wv"] = math::xavier_tensor(cfg.width, cfg.width, rng);
  ps["wo"] = math::xavier_tensor(cfg.width, cfg.width, rng);
  ps["n2.g"] = Tensor({1, cfg.width}, 1.0);
  ps["up.w"] = math::xavier_tensor(cfg.width, cfg.width, rng);
  ps["up.b"] = Tensor({1, cfg.width});
  return m;
}

math::Tensor encode(const EncoderModel& m, const dsl::Program& p) {
  if (p.tokens.empty()) throw std::invalid_argument("encode: empty program");
  check_tokens(p.tokens, m.cfg, "encode");
  Graph g;
  auto lv = leaves(g, m.params, false);
  auto z = encoder_latent(g, lv, p.tokens);
  return Tensor::from({m.cfg.latent}, g.val(z).data);
}

math::Tensor encode_batch(const EncoderModel& m, const std::vector<dsl::Program>& ps) {
  Tensor out({ps.size(), m.cfg.latent});
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Tensor z = encode(m, ps[i]);
    std::copy(z.data.begin(), z.data.end(), out.data.begin() + i * m.cfg.latent);
  }
  return out;
}

math::Tensor map_prompt(const MapperModel& m, const math::Tensor& z) {
  Graph g;
  auto lv = leaves(g, m.params, false);
  auto rows = mapper_rows(g, lv, m.cfg, g.leaf(z_row(z, m.cfg.latent, "map_prompt")), nullptr,
                          false);
  return g.val(rows);
}

math::Tensor latent_prefix(const DecoderModel& m, const math::Tensor& z) {
  Graph g;
  auto lv = leaves(g, m.params, false);
  auto row = bottleneck_row(g, lv, g.leaf(z_row(z, m.cfg.latent, "latent_prefix")));
  return g.val(row);
}

math::Tensor teacher_logits(const DecoderModel& m, std::size_t family, const math::Tensor& prefix,
                            const std::vector<int>& tokens) {
  check_family(family, m.cfg, "teacher_logits");
  check_tokens(tokens, m.cfg, "teacher_logits");
  if (prefix.shape.size() != 2 || prefix.cols() != m.cfg.width) {
    throw std::invalid_argument("teacher_logits: prefix rows must be [P, width]");
  }
  Graph g;
  auto p = leaves(g, m.params, false);
  auto logits = decoder_logits(g, p, m.cfg, family, g.leaf(prefix), tokens, nullptr, false);
  return g.val(logits);
}

double sequence_nll(const DecoderModel& m, std::size_t family, const math::Tensor& prefix,
                    const std::vector<int>& tokens) {
  check_family(family, m.cfg, "sequence_nll");
  check_tokens(tokens, m.cfg, "sequence_nll");
  Graph g;
  auto p = leaves(g, m.params, false);
  auto logits = decoder_logits(g, p, m.cfg, family, g.leaf(prefix), tokens, nullptr, false);
  return g.val(nll_of_logits(g, logits, tokens)).data[0];
}

double autoencoder_nll(const EncoderModel& enc, const DecoderModel& dec, const dsl::Program& p,
                       std::size_t family) {
  return sequence_nll(dec, family, latent_prefix(dec, encode(enc, p)), p.tokens);
}

double mapper_nll(const MapperModel& map, const EncoderModel& enc, const DecoderModel& dec,
                  const dsl::Program& p, std::size_t family) {
  return sequence_nll(dec, family, map_prompt(map, encode(enc, p)), p.tokens);
}

double token_accuracy(const EncoderModel& enc, const DecoderModel& dec,
                      const std::vector<dsl::Program>& ps, std::size_t family) {
  std::size_t hits = 0, total = 0;
  for (const auto& p : ps) {
    const Tensor logits = teacher_logits(dec, family, latent_prefix(dec, encode(enc, p)), p.tokens);
    std::vector<int> targets(p.tokens);
    targets.push_back(dsl::tok::EOS);
    for (std::size_t r = 0; r < targets.size(); ++r) {
      const auto row = logits.data.begin() + r * dec.cfg.vocab;
      const auto best = std::max_element(row, row + dec.cfg.vocab) - row;
      hits += best == targets[r] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<int> decode(const DecoderModel& m, std::size_t family, const math::Tensor& prompt,
                        double temperature, double top_p, math::Rng& rng, std::size_t max_len) {
  if (prompt.shape.size() != 2 || prompt.rows() != m.cfg.prompt_tokens ||
      prompt.cols() != m.cfg.width) {
    throw std::invalid_argument("decode: soft prompt must be [" +
                                std::to_string(m.cfg.prompt_tokens) + ", " +
                                std::to_string(m.cfg.width) + "], got " +
                                math::shape_str(prompt.shape));
  }
  return decode_with_prefix(m, family, prompt, temperature, top_p, rng, max_len);
}

std::vector<int> decode_from_latent(const DecoderModel& m, std::size_t family,
                                    const math::Tensor& z, double temperature, double top_p,
                                    math::Rng& rng, std::size_t max_len) {
  return decode_with_prefix(m, family, latent_prefix(m, z), temperature, top_p, rng, max_len);
}

double greedy_reconstruction_rate(const MapperModel& map, const EncoderModel& enc,
                                  const DecoderModel& dec, const std::vector<dsl::Program>& ps,
                                  std::size_t family) {
  if (ps.empty()) return 0.0;
  std::size_t exact = 0;
  math::Rng unused(0);
  for (const auto& p : ps) {
    const auto out = decode(dec, family, map_prompt(map, encode(enc, p)), 0.0, 1.0, unused,
                            dec.cfg.max_len);
    if (out == p.tokens) ++exact;
  }
  return static_cast<double>(exact) / static_cast<double>(ps.size());
}

LossGrads autoencoder_loss_grads(const EncoderModel& enc, const DecoderModel& dec,
                                 const dsl::Program& p, std::size_t family) {
  if (p.tokens.empty()) throw std::invalid_argument("autoencoder_loss_grads: empty program");
  check_family(family, dec.cfg, "autoencoder_loss_grads");
  check_tokens(p.tokens, dec.cfg, "autoencoder_loss_grads");
  if (enc.cfg.latent != dec.cfg.latent) {
    throw std::invalid_argument("autoencoder_loss_grads: latent widths disagree");
  }
  const math::ParamSet joint = merge_prefixed(enc.params, dec.params);
  Graph g;
  auto all = leaves(g, joint, true);
  auto enc_leaves = strip_prefix(all, "enc.");
  auto dec_leaves = strip_prefix(all, "dec.");
  auto z = encoder_latent(g, enc_leaves, p.tokens);
  auto prefix = bottleneck_row(g, dec_leaves, z);
  auto logits = decoder_logits(g, dec_leaves, dec.cfg, family, prefix, p.tokens, nullptr, false);
  auto loss = nll_of_logits(g, logits, p.tokens);
  g.backward(loss);
  LossGrads out;
  out.loss = g.val(loss).data[0];
  out.grads = zero_grads(joint);
  accumulate_grads(out.grads, g, all, 1.0);
  return out;
}

LossGrads mapper_loss_grads(const MapperModel& map, const EncoderModel& enc,
                            const DecoderModel& dec, const dsl::Program& p, std::size_t family) {
  check_family(family, dec.cfg, "mapper_loss_grads");
  check_tokens(p.tokens, dec.cfg, "mapper_loss_grads");
  const Tensor z = Tensor::from({1, dec.cfg.latent}, encode(enc, p).data);
  Graph g;
  auto mp = leaves(g, map.params, true);
  auto dp = leaves(g, dec.params, false);
  auto prompt = mapper_rows(g, mp, dec.cfg, g.leaf(z), nullptr, false);
  auto logits = decoder_logits(g, dp, dec.cfg, family, prompt, p.tokens, nullptr, false);
  auto loss = nll_of_logits(g, logits, p.tokens);
  g.backward(loss);
  LossGrads out;
  out.loss = g.val(loss).data[0];
  out.grads = zero_grads(map.params);
  accumulate_grads(out.grads, g, mp, 1.0);
  return out;
}

AutoencoderResult pretrain_autoencoder(const std::vector<dsl::Program>& corpus,
                                       const AutoencoderConfig& cfg, math::Rng& rng) {
  check_model_config(cfg.model);
  if (corpus.size() < cfg.min_corpus) {
    throw std::invalid_argument("pretrain_autoencoder: corpus of " +
                                std::to_string(corpus.size()) + " programs is below the floor " +
                                std::to_string(cfg.min_corpus));
  }
  if (cfg.require_all_tasks) {
    std::set<dsl::Task> tasks;
    for (const auto& p : corpus) tasks.insert(p.task);
    if (tasks.size() < 4) {
      throw std::invalid_argument("pretrain_autoencoder: corpus does not span all tasks");
    }
  }
  if (cfg.batch_programs == 0) throw std::invalid_argument("pretrain_autoencoder: empty batch");
  for (const auto& p : corpus) check_tokens(p.tokens, cfg.model, "pretrain_autoencoder");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const auto holdout_count = static_cast<std::size_t>(
      std::llround(cfg.holdout_fraction * static_cast<double>(corpus.size())));
  if (holdout_count >= corpus.size()) {
    throw std::invalid_argument("pretrain_autoencoder: holdout fraction leaves no training data");
  }
  std::vector<std::size_t> holdout(order.begin(), order.begin() + holdout_count);
  std::vector<std::size_t> train(order.begin() + holdout_count, order.end());

  AutoencoderResult res;
  res.encoder = make_encoder(cfg.model, rng);
  res.decoder = make_decoder(cfg.model, rng);
  math::ParamSet joint = merge_prefixed(res.encoder.params, res.decoder.params);
  const math::AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(train);
    double epoch_sum = 0.0;
    for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_programs) {
      const std::size_t end = std::min(train.size(), begin + cfg.batch_programs);
      auto acc = zero_grads(joint);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const dsl::Program& prog = corpus[train[i]];
        const auto family = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(cfg.model.families) - 1));
        Graph g;
        auto all = leaves(g, joint, true);
        auto enc_leaves = strip_prefix(all, "enc.");
        auto dec_leaves = strip_prefix(all, "dec.");
        auto z = encoder_latent(g, enc_leaves, prog.tokens);
        auto prefix = bottleneck_row(g, dec_leaves, z);
        auto logits =
            decoder_logits(g, dec_leaves, cfg.model, family, prefix, prog.tokens, &rng, true);
        auto loss = nll_of_logits(g, logits, prog.tokens);
        const double lv = g.val(loss).data[0];
        if (!std::isfinite(lv)) {
          throw math::NumericsError("pretrain_autoencoder: non-finite loss at epoch " +
                                    std::to_string(epoch));
        }
        g.backward(loss);
        accumulate_grads(acc, g, all, inv);
        epoch_sum += lv;
      }
      math::adamw_step(joint, acc, opt);
    }
    res.report.epoch_loss.push_back(epoch_sum / static_cast<double>(train.size()));
  }

  res.encoder.params = extract_prefixed(joint, "enc.");
  res.decoder.params = extract_prefixed(joint, "dec.");
  res.encoder.frozen = true;
  res.decoder.frozen = true;
  res.report.train_programs = train.size();
  res.report.holdout_programs = holdout.size();

  if (cfg.epochs >= 2) {
    const double initial = res.report.epoch_loss.front();
    const double final_loss = res.report.epoch_loss.back();
    if (final_loss > 0.9 * initial) {
      throw TrainingError("pretrain_autoencoder: loss " + std::to_string(final_loss) +
                          " did not undercut 90% of the initial " + std::to_string(initial));
    }
  }

  std::vector<dsl::Program> holdout_programs;
  for (std::size_t idx : holdout) holdout_programs.push_back(corpus[idx]);
  res.report.holdout_token_accuracy =
      token_accuracy(res.encoder, res.decoder, holdout_programs, 0);
  return res;
}

MapperTraining train_mapper(const std::vector<dsl::Program>& corpus, const EncoderModel& enc,
                            const DecoderModel& dec, const MapperTrainConfig& cfg,
                            math::Rng& rng) {
  if (!enc.frozen || !dec.frozen) {
    throw std::invalid_argument("train_mapper: encoder and decoder must be frozen");
  }
  if (corpus.empty()) throw std::invalid_argument("train_mapper: empty corpus");
  if (cfg.batch_programs == 0) throw std::invalid_argument("train_mapper: empty batch");
  if (enc.cfg.latent != dec.cfg.latent) {
    throw std::invalid_argument("train_mapper: encoder/decoder latent widths disagree");
  }
  for (const auto& p : corpus) check_tokens(p.tokens, dec.cfg, "train_mapper");

  MapperTraining out;
  out.mapper = make_mapper(dec.cfg, rng);
  const math::AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};

  // The encoder is frozen, so every program's latent is fixed for the whole
  // fit.
  std::vector<Tensor> zs;
  zs.reserve(corpus.size());
  for (const auto& p : corpus) {
    zs.push_back(Tensor::from({1, dec.cfg.latent}, encode(enc, p).data));
  }

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_programs) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_programs);
      auto acc = zero_grads(out.mapper.params);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const dsl::Program& prog = corpus[order[i]];
        const auto family = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(dec.cfg.families) - 1));
        Graph g;
        auto mp = leaves(g, out.mapper.params, true);
        auto dp = leaves(g, dec.params, false);
        auto prompt = mapper_rows(g, mp, dec.cfg, g.leaf(zs[order[i]]), &rng, true);
        // Frozen decoder runs inference-mode: no dropout inside it.
        auto logits =
            decoder_logits(g, dp, dec.cfg, family, prompt, prog.tokens, nullptr, false);
        auto loss = nll_of_logits(g, logits, prog.tokens);
        const double lv = g.val(loss).data[0];
        if (!std::isfinite(lv)) {
          throw math::NumericsError("train_mapper: non-finite loss at epoch " +
                                    std::to_string(epoch));
        }
        g.backward(loss);
        accumulate_grads(acc, g, mp, inv);
        epoch_sum += lv;
      }
      math::adamw_step(out.mapper.params, acc, opt);
    }
    out.report.epoch_loss.push_back(epoch_sum / static_cast<double>(order.size()));
  }

  if (cfg.epochs >= 2) {
    const double initial = out.report.epoch_loss.front();
    const double final_loss = out.report.epoch_loss.back();
    if (final_loss > 0.9 * initial) {
      throw TrainingError("train_mapper: loss " + std::to_string(final_loss) +
                          " did not undercut 90% of the initial " + std::to_string(initial));
    }
  }
  return out;
}

void save_encoder(const std::string& path, const EncoderModel& m) {
  math::save_checkpoint(path, m.params, config_meta(m.cfg, "encoder", m.frozen));
}

EncoderModel load_encoder(const std::string& path) {
  std::map<std::string, std::string> meta;
  EncoderModel m;
  m.params = math::load_checkpoint(path, &meta);
  m.cfg = config_from_meta(meta, "encoder", &m.frozen);
  return m;
}

void save_decoder(const std::string& path, const DecoderModel& m) {
  math::save_checkpoint(path, m.params, config_meta(m.cfg, "decoder", m.frozen));
}

DecoderModel load_decoder(const std::string& path) {
  std::map<std::string, std::string> meta;
  DecoderModel m;
  m.params = math::load_checkpoint(path, &meta);
  m.cfg = config_from_meta(meta, "decoder", &m.frozen);
  return m;
}

void save_mapper(const std::string& path, const MapperModel& m) {
  math::save_checkpoint(path, m.params, config_meta(m.cfg, "mapper", false));
}

MapperModel load_mapper(const std::string& path) {
  std::map<std::string, std::string> meta;
  MapperModel m;
  m.params = math::load_checkpoint(path, &meta);
  m.cfg = config_from_meta(meta, "mapper", nullptr);
  return m;
}

}  // namespace lhs::models
