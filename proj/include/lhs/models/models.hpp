#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lhs/dsl/program.hpp"
#include "lhs/math/adamw.hpp"
#include "lhs/math/rng.hpp"
#include "lhs/math/tensor.hpp"

namespace lhs::models {

// Shared dimensions for the encoder, decoder, and prompt mapper. The decoder
// is a small causal transformer; `families` counts the learned context-token
// sequences that stand in for textual task prompts.
struct ModelConfig {
  std::size_t vocab = 31;
  std::size_t embed = 64;          // encoder token-embedding width
  std::size_t latent = 128;        // z dimension
  std::size_t width = 128;         // decoder embedding width e
  std::size_t heads = 2;
  std::size_t blocks = 2;
  std::size_t ffn_hidden = 256;
  std::size_t context_tokens = 8;  // rows per context family
  std::size_t families = 3;
  std::size_t prompt_tokens = 16;  // soft-prompt rows K
  double dropout = 0.1;
  std::size_t max_len = 64;        // generation cap; positions cover max_len+1 rows
};

struct EncoderModel {
  ModelConfig cfg;
  math::ParamSet params;
  bool frozen = false;
};

struct DecoderModel {
  ModelConfig cfg;
  math::ParamSet params;
  bool frozen = false;
};

struct MapperModel {
  ModelConfig cfg;
  math::ParamSet params;
};

// Raised when a fit fails its convergence contract; the message carries the
// initial and final losses.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

EncoderModel make_encoder(const ModelConfig& cfg, math::Rng& rng);
DecoderModel make_decoder(const ModelConfig& cfg, math::Rng& rng);
MapperModel make_mapper(const ModelConfig& cfg, math::Rng& rng);

// Mean-pooled token embeddings through a two-layer projection; deterministic.
math::Tensor encode(const EncoderModel& m, const dsl::Program& p);       // rank-1 [latent]
math::Tensor encode_batch(const EncoderModel& m, const std::vector<dsl::Program>& ps);

// z projected to a [prompt_tokens, width] soft prefix; deterministic.
math::Tensor map_prompt(const MapperModel& m, const math::Tensor& z);

// Decoder prefix row for the autoencoder path: z through the bottleneck
// projection, [1, width].
math::Tensor latent_prefix(const DecoderModel& m, const math::Tensor& z);

// Teacher-forced logits [T+1, vocab] for input [BOS, tokens...] behind the
// given context family and prefix rows ([P, width]). Dropout off.
math::Tensor teacher_logits(const DecoderModel& m, std::size_t family,
                            const math::Tensor& prefix, const std::vector<int>& tokens);

// Per-token negative log-likelihood of `tokens ++ [EOS]` under the decoder.
double sequence_nll(const DecoderModel& m, std::size_t family, const math::Tensor& prefix,
                    const std::vector<int>& tokens);

double autoencoder_nll(const EncoderModel& enc, const DecoderModel& dec, const dsl::Program& p,
                       std::size_t family);
double mapper_nll(const MapperModel& map, const EncoderModel& enc, const DecoderModel& dec,
                  const dsl::Program& p, std::size_t family);

// Fraction of teacher-forced positions whose argmax logit equals the target,
// over all programs; autoencoder prefix path.
double token_accuracy(const EncoderModel& enc, const DecoderModel& dec,
                      const std::vector<dsl::Program>& ps, std::size_t family);

// Ancestral sampling with temperature and nucleus truncation. temperature
// <= 0 selects the argmax at every step. Returns sampled tokens up to but
// excluding EOS; never longer than max_len. Token validity is the parser's
// problem, not ours.
std::vector<int> decode(const DecoderModel& m, std::size_t family, const math::Tensor& prompt,
                        double temperature, double top_p, math::Rng& rng, std::size_t max_len);
std::vector<int> decode_from_latent(const DecoderModel& m, std::size_t family,
                                    const math::Tensor& z, double temperature, double top_p,
                                    math::Rng& rng, std::size_t max_len);

// Fraction of programs reproduced token-exactly by a greedy decode of their
// own mapped latent.
double greedy_reconstruction_rate(const MapperModel& map, const EncoderModel& enc,
                                  const DecoderModel& dec, const std::vector<dsl::Program>& ps,
                                  std::size_t family);

// Single-example training tape with dropout off: the loss plus parameter
// gradients, for finite-difference verification. Autoencoder grads are keyed
// "enc.*" / "dec.*"; mapper grads cover the mapper only.
struct LossGrads {
  double loss = 0.0;
  std::map<std::string, math::Tensor> grads;
};

LossGrads autoencoder_loss_grads(const EncoderModel& enc, const DecoderModel& dec,
                                 const dsl::Program& p, std::size_t family);
LossGrads mapper_loss_grads(const MapperModel& map, const EncoderModel& enc,
                            const DecoderModel& dec, const dsl::Program& p, std::size_t family);

struct AutoencoderConfig {
  ModelConfig model;
  std::size_t epochs = 40;
  std::size_t batch_programs = 16;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double holdout_fraction = 0.1;
  // Floor on corpus size; toy fits may lower it. The corpus must cover every
  // task whenever this floor is active at its default.
  std::size_t min_corpus = 500;
  bool require_all_tasks = true;
};

struct AutoencoderReport {
  std::vector<double> epoch_loss;  // mean per-token NLL over training programs
  double holdout_token_accuracy = 0.0;
  std::size_t train_programs = 0;
  std::size_t holdout_programs = 0;
};

struct AutoencoderResult {
  EncoderModel encoder;
  DecoderModel decoder;
  AutoencoderReport report;
};

// Joint sequence-autoencoder fit: encoder feeds the decoder one projected
// bottleneck token; teacher-forced cross-entropy, context family sampled per
// example. Both returned models are frozen. Throws TrainingError when the
// final epoch loss fails to undercut 90% of the first.
AutoencoderResult pretrain_autoencoder(const std::vector<dsl::Program>& corpus,
                                       const AutoencoderConfig& cfg, math::Rng& rng);

struct MapperTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_programs = 16;
  double lr = 1e-3;
  double weight_decay = 1e-5;
};

struct MapperReport {
  std::vector<double> epoch_loss;
};

struct MapperTraining {
  MapperModel mapper;
  MapperReport report;
};

// Fits a fresh mapper through the frozen decoder with teacher-forced NLL,
// drawing one context family per example per epoch. Encoder and decoder must
// be frozen and are never touched.
MapperTraining train_mapper(const std::vector<dsl::Program>& corpus, const EncoderModel& enc,
                            const DecoderModel& dec, const MapperTrainConfig& cfg,
                            math::Rng& rng);

void save_encoder(const std::string& path, const EncoderModel& m);
EncoderModel load_encoder(const std::string& path);
void save_decoder(const std::string& path, const DecoderModel& m);
DecoderModel load_decoder(const std::string& path);
void save_mapper(const std::string& path, const MapperModel& m);
MapperModel load_mapper(const std::string& path);

}  // namespace lhs::models
