#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dnagen/gradcore/adam.hpp"
#include "dnagen/models/networks.hpp"
#include "dnagen/models/pwm.hpp"
#include "dnagen/seqdata/datasets.hpp"

namespace dnagen::training {

// ---- WGAN-GP ----------------------------------------------------------------

struct PenaltyTerms {
  ad::Var penalty;  // mean over the batch of (||grad_x D(x_hat)|| - 1)^2
  ad::Var norms;    // [B] gradient norms
};

// x_hat = u * real + (1 - u) * fake with one u per sample. The penalty is a
// node of params' graph and can be differentiated with respect to them.
PenaltyTerms gradient_penalty(const models::DiscriminatorSpec& spec,
                              std::span<const ad::Var> params, const ad::Tensor& real,
                              const ad::Tensor& fake, std::span<const double> u);

struct DiscStepResult {
  double loss = 0.0;       // E[D(fake)] - E[D(real)] + lambda * penalty (descended)
  double real_mean = 0.0;  // E[D(real)]
  double fake_mean = 0.0;  // E[D(G(z))]
  double penalty = 0.0;
  double grad_norm = 0.0;  // mean ||grad_x D(x_hat)||
};

// One Adam step on the discriminator. fake = G(z) is treated as data.
DiscStepResult disc_step(models::Discriminator& disc, ad::AdamState& opt,
                         const models::Generator& gen, const ad::Tensor& real,
                         const ad::Tensor& z, std::span<const double> u, double lambda);

// One Adam step on the generator; returns -E[D(G(z))] (descended).
double gen_step(models::Generator& gen, ad::AdamState& opt, const models::Discriminator& disc,
                const ad::Tensor& z);

struct GanTrainConfig {
  std::size_t batch = 64;
  std::size_t steps = 1000;  // generator updates
  std::size_t critic_steps = 5;
  double lambda = 10.0;
  ad::AdamConfig adam{1e-4, 0.5, 0.9, 1e-8};
  std::uint64_t seed = 1;
  std::size_t snapshot_every = 0;  // 0 disables snapshots
  std::size_t snapshot_samples = 256;
  std::optional<models::Pwm> motif;  // enables the motif-match snapshot metric
  double motif_fraction = 0.9;
  void check() const;
};

struct GanStepMetrics {
  std::size_t step = 0;
  double d_loss = 0.0;  // last critic step of this generator step
  double g_loss = 0.0;
  double penalty = 0.0;
  double grad_norm = 0.0;
  std::optional<double> one_hotness;
  std::optional<double> motif_rate;
};

struct GanResult {
  models::Generator gen;
  models::Discriminator disc;
  std::vector<GanStepMetrics> metrics;
};

using GanProgress = std::function<void(const GanStepMetrics&)>;

// data: [N, L, C] real examples (C = 4, or 5 with an annotation track).
// Alternates critic_steps discriminator updates with one generator update.
// Throws TrainingError on non-finite losses.
GanResult train_wgan(const ad::Tensor& data, const models::GeneratorSpec& gspec,
                     const models::DiscriminatorSpec& dspec, const GanTrainConfig& cfg,
                     const GanProgress& progress = {});

void write_gan_metrics(std::ostream& out, std::span<const GanStepMetrics> metrics);

// Fraction of positions whose largest base channel is at least `threshold`.
double one_hotness(const ad::Tensor& x, double threshold = 0.9);

// pwm_score(s) >= fraction * best achievable score.
bool motif_hit(const seq::DnaSequence& s, const models::Pwm& pwm, double fraction = 0.9);
double motif_match_rate(std::span<const seq::DnaSequence> seqs, const models::Pwm& pwm,
                        double fraction = 0.9);

// Draws n standard-normal latent codes, [n, D_z].
ad::Tensor sample_latent(std::size_t n, std::size_t latent_dim, std::mt19937_64& rng);

// ---- predictor --------------------------------------------------------------

struct PredictorTrainConfig {
  std::size_t batch = 32;
  std::size_t epochs = 20;
  ad::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 1;
  void check() const;
};

struct PredictorEpochMetrics {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double valid_mse = 0.0;
  double valid_spearman = 0.0;
};

struct PredictorResult {
  models::Predictor predictor;
  std::vector<PredictorEpochMetrics> metrics;
};

// Minibatch MSE on the train split; validation metrics each epoch (on the train
// split when no validation items exist).
PredictorResult train_predictor(const seq::ScoredDataset& data, const models::PredictorSpec& spec,
                                const PredictorTrainConfig& cfg);

void write_predictor_metrics(std::ostream& out, std::span<const PredictorEpochMetrics> metrics);

double mse(std::span<const double> a, std::span<const double> b);

// Pearson correlation of average ranks.
double spearman(std::span<const double> a, std::span<const double> b);
std::vector<double> average_ranks(std::span<const double> v);

std::vector<double> predict_scores(const models::Predictor& p,
                                   std::span<const seq::DnaSequence> seqs);

}  // namespace dnagen::training
