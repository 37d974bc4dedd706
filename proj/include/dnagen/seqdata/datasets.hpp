#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dnagen/models/pwm.hpp"
#include "dnagen/seqdata/sequence.hpp"

namespace dnagen::seq {

// ---- FASTA ----------------------------------------------------------------

// Reads FASTA records and cuts each record body into non-overlapping windows of
// `window` bases. Bodies are uppercased and split at every non-ACGT character
// (N runs, IUPAC codes); each clean run is windowed from its own start and a
// trailing partial window is dropped. CR/LF line endings are accepted.
// An empty result appends a message to `warnings` when given.
std::vector<DnaSequence> ingest_fasta(std::istream& in, std::size_t window,
                                      std::vector<std::string>* warnings = nullptr);
std::vector<DnaSequence> ingest_fasta(const std::filesystem::path& path, std::size_t window,
                                      std::vector<std::string>* warnings = nullptr);

// ---- scored datasets --------------------------------------------------------

enum class Split { Train, Valid, Test };
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ScoredDataset {
  std::vector<DnaSequence> sequences;
  std::vector<double> scores;
  std::vector<Split> splits;

  std::size_t size() const noexcept { return sequences.size(); }
  // Items with the given label, in dataset order.
  ScoredDataset subset(Split s) const;
  std::vector<DnaSequence> sequences_in(Split s) const;
  void check() const;

  // TSV with header "sequence score split".
  static ScoredDataset read_tsv(std::istream& in);
  static ScoredDataset load_tsv(const std::filesystem::path& path);
  void write_tsv(std::ostream& out) const;
  void save_tsv(const std::filesystem::path& path) const;

  friend bool operator==(const ScoredDataset&, const ScoredDataset&) = default;
};

struct SplitIndices {
  std::vector<std::size_t> train, valid, test;
};

// Seeded shuffle, then 80/10/10 with floor for valid and test. Throws
// ConfigError below 10 items.
SplitIndices split_indices(std::size_t n, std::uint64_t seed);
void assign_splits(ScoredDataset& data, std::uint64_t seed);

// Keeps items scoring at most the nearest-rank pct-th percentile.
// pct must lie in (0, 100].
ScoredDataset percentile_filter(const ScoredDataset& data, double pct = 40.0);

// ---- synthetic generators ---------------------------------------------------

using BaseDistribution = std::array<double, 4>;
inline constexpr BaseDistribution kUniformBases{0.25, 0.25, 0.25, 0.25};

struct MotifDatasetSpec {
  std::size_t count = 10000;
  std::size_t length = 20;
  models::Pwm pwm;
  double planting_prob = 1.0;
  BaseDistribution background = kUniformBases;
  std::uint64_t seed = 1;
};

struct AnnotatedSequences {
  std::vector<DnaSequence> sequences;
  // Binary per-position tracks (1 inside the marked span).
  std::vector<std::vector<double>> tracks;
  // Span start per sequence, absent when nothing was planted.
  std::vector<std::optional<std::size_t>> starts;
};

// Background draws with a PWM sample written over a uniformly placed span
// with probability planting_prob. Throws ConfigError when K > L.
AnnotatedSequences synth_motif_dataset(const MotifDatasetSpec& spec);

struct ExonDatasetSpec {
  std::size_t count = 4000;
  std::size_t length = 40;
  std::size_t min_exon = 10;
  std::size_t max_exon = 20;
  BaseDistribution intron = {0.3, 0.2, 0.2, 0.3};
  BaseDistribution exon = {0.2, 0.3, 0.3, 0.2};
  // Written so that its column `start_anchor` lands on the first exon base.
  models::Pwm start_motif;
  std::size_t start_anchor = 0;
  std::uint64_t seed = 1;
};

// One exon span per sequence, tracks mark the span.
AnnotatedSequences synth_exon_dataset(const ExonDatasetSpec& spec);

// [B, L, 5]: one-hot bases plus the track as a fifth channel.
ad::Tensor encode_annotated(const AnnotatedSequences& data);

// Hidden-motif scoring function: sigmoid(scale * sum_i w_i * pwm_score_i + shift).
class SyntheticOracle {
 public:
  SyntheticOracle() = default;
  SyntheticOracle(std::vector<models::Pwm> motifs, std::vector<double> weights, double scale,
                  double shift);

  // Random motifs, then calibrated on random probes so that the 2nd and 98th
  // percentile raw scores map to 0.1 and 0.9.
  static SyntheticOracle random(std::size_t motifs, std::size_t motif_length,
                                std::size_t probe_length, std::uint64_t seed);
  // Shares the first `shared` motifs of `base`, draws the rest afresh, and
  // calibrates independently.
  static SyntheticOracle related(const SyntheticOracle& base, std::size_t shared,
                                 std::size_t probe_length, std::uint64_t seed);

  void calibrate(std::size_t probe_length, std::size_t probes, std::uint64_t seed);

  double raw(const DnaSequence& s) const;
  double score(const DnaSequence& s) const;
  std::vector<double> score(const std::vector<DnaSequence>& s) const;
  // Differentiable version on relaxed input, [L, 4] -> scalar or [B, L, 4] -> [B].
  ad::Var forward(ad::Var x) const;

  const std::vector<models::Pwm>& motifs() const noexcept { return motifs_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double scale() const noexcept { return scale_; }
  double shift() const noexcept { return shift_; }
  // Highest-weight motif's consensus.
  DnaSequence strongest_consensus() const;

  std::string to_json() const;
  static SyntheticOracle from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static SyntheticOracle load(const std::filesystem::path& path);

 private:
  std::vector<models::Pwm> motifs_;
  std::vector<double> weights_;
  double scale_ = 1.0;
  double shift_ = 0.0;
};

std::vector<DnaSequence> random_sequences(std::size_t count, std::size_t length,
                                          std::mt19937_64& rng,
                                          const BaseDistribution& bases = kUniformBases);

// Random probes scored by the oracle, split 80/10/10. Redraws (bounded) until
// min score < 0.2 and max > 0.8; throws ConfigError if that never happens.
ScoredDataset synth_binding_data(const SyntheticOracle& oracle, std::size_t count,
                                 std::size_t length, std::uint64_t seed);

}  // namespace dnagen::seq
