#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dnagen/gradcore/graph.hpp"
#include "dnagen/models/networks.hpp"
#include "dnagen/models/pwm.hpp"
#include "dnagen/seqdata/datasets.hpp"

namespace dnagen::design {

// A differentiable property of relaxed sequences. forward maps [L, 4] to a
// scalar and [B, L, 4] to [B].
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual ad::Var forward(ad::Var x) const = 0;
  // Required sequence length, when the scorer has one.
  virtual std::optional<std::size_t> length() const { return std::nullopt; }
  double score(const seq::DnaSequence& s) const;
};

class PwmScorer : public Scorer {
 public:
  explicit PwmScorer(models::Pwm pwm, std::string name = "pwm");
  std::string name() const override { return name_; }
  ad::Var forward(ad::Var x) const override;
  const models::Pwm& pwm() const noexcept { return pwm_; }

 private:
  models::Pwm pwm_;
  std::string name_;
};

class PredictorScorer : public Scorer {
 public:
  explicit PredictorScorer(models::Predictor p, std::string name = "predictor");
  std::string name() const override { return name_; }
  ad::Var forward(ad::Var x) const override;
  std::optional<std::size_t> length() const override { return p_.spec.length; }

 private:
  models::Predictor p_;
  std::string name_;
};

class OracleScorer : public Scorer {
 public:
  explicit OracleScorer(seq::SyntheticOracle o, std::string name = "oracle");
  std::string name() const override { return name_; }
  ad::Var forward(ad::Var x) const override;
  const seq::SyntheticOracle& oracle() const noexcept { return o_; }

 private:
  seq::SyntheticOracle o_;
  std::string name_;
};

// Total probability mass on one channel, summed over positions.
class ChannelMassScorer : public Scorer {
 public:
  explicit ChannelMassScorer(std::size_t channel, std::string name = "channel_mass");
  std::string name() const override { return name_; }
  ad::Var forward(ad::Var x) const override;

 private:
  std::size_t channel_;
  std::string name_;
};

struct Term {
  std::shared_ptr<const Scorer> scorer;
  double weight = 1.0;
  int sign = 1;  // +1 maximizes the property, -1 minimizes it
};

struct Objective {
  std::vector<Term> terms;
  void check() const;
};

// t = sum of sign * weight * f(x). Inputs with more than 4 channels are cut to
// the 4 base channels. per_term, when given, receives each unweighted f(x).
ad::Var objective_eval(ad::Var x, const Objective& obj, std::vector<ad::Var>* per_term = nullptr);

enum class Mode { Direct, Joint };

struct DesignConfig {
  Mode mode = Mode::Direct;
  double step_size = 0.1;
  double prior_weight = 0.0;
  double noise_std = 1e-5;
  std::size_t max_steps = 1000;
  std::size_t restarts = 10;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool plain_steps = false;  // z += step_size * grad instead of Adam
  double tolerance = 1e-8;
  std::size_t patience = 50;
  void check() const;
};

struct RestartResult {
  std::size_t restart = 0;
  bool ok = true;
  std::string error;
  std::size_t steps = 0;
  std::vector<double> trajectory;  // t before each update
  ad::Tensor z;
  ad::Tensor x;  // final relaxed sequence [L, 4]
  seq::DnaSequence sequence;
  double final_t = 0.0;            // objective on the final relaxed sequence
  std::vector<double> term_scores;  // each term's scorer on the decoded sequence
};

struct DesignResult {
  std::vector<std::string> term_names;
  std::vector<RestartResult> restarts;
  std::size_t succeeded() const;
};

// Free [L, 4] latent per restart, x = softmax(z).
DesignResult direct_design(const Objective& obj, std::size_t length, const DesignConfig& cfg);

// z in R^{D_z} per restart, x = G(z). Throws ConfigError when the generator
// output length does not fit a scorer.
DesignResult joint_design(const models::Generator& gen, const Objective& obj,
                          const DesignConfig& cfg);

// Per-restart design table.
struct ReportRow {
  std::size_t restart = 0;
  std::size_t steps = 0;
  double final_t = 0.0;
  std::string sequence;
  std::vector<double> term_scores;
  std::optional<double> oracle;
  std::string motif_hits;  // comma-separated positions
};

struct DesignReport {
  std::vector<std::string> term_names;
  bool has_oracle = false;
  std::vector<ReportRow> rows;
  double max_t = 0.0, mean_t = 0.0;
  double max_oracle = 0.0, mean_oracle = 0.0;
  void write_tsv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
};

struct ReportOptions {
  const seq::SyntheticOracle* oracle = nullptr;
  const models::Pwm* motif = nullptr;
  double motif_threshold = 0.0;
};

DesignReport design_report(const DesignResult& result, const ReportOptions& opt = {});

void write_trajectories(std::ostream& out, const DesignResult& result);

// Direct design for each (w_a, w_b) pair of the objective w_a * A + w_b * B;
// rows of (w_a, w_b, sequence, score_a, score_b).
struct ParetoPoint {
  double weight_a = 0.0, weight_b = 0.0;
  std::string sequence;
  double score_a = 0.0, score_b = 0.0;
};

std::vector<ParetoPoint> pareto_sweep(std::shared_ptr<const Scorer> a,
                                      std::shared_ptr<const Scorer> b,
                                      const std::vector<std::pair<double, double>>& weights,
                                      std::size_t length, const DesignConfig& cfg);

void write_scatter_tsv(std::ostream& out, const std::string& cohort,
                       const std::vector<ParetoPoint>& points, bool header);

}  // namespace dnagen::design
