#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dnagen/gradcore/adam.hpp"
#include "dnagen/models/networks.hpp"
#include "dnagen/models/pwm.hpp"
#include "dnagen/seqdata/datasets.hpp"
#include "dnagen/training/training.hpp"

namespace dnagen::eval {

// ---- distances --------------------------------------------------------------

// Unit-cost Levenshtein distance.
std::size_t edit_distance(std::string_view a, std::string_view b);
inline std::size_t edit_distance(const seq::DnaSequence& a, const seq::DnaSequence& b) {
  return edit_distance(a.str(), b.str());
}

struct DistanceDistribution {
  std::vector<std::size_t> minima;     // one per query
  std::vector<std::size_t> histogram;  // histogram[d] = queries at distance d
  double mean = 0.0;
};

// Minimum edit distance from each query to the reference set. With
// exclude_self, reference item i is skipped for query i (for a set compared
// with itself). Throws ConfigError on an empty reference.
DistanceDistribution distance_distribution(std::span<const seq::DnaSequence> queries,
                                           std::span<const seq::DnaSequence> reference,
                                           bool exclude_self = false);

// Rows (distance, count, cohort).
void write_histogram_tsv(std::ostream& out, const std::vector<std::pair<std::string, DistanceDistribution>>& cohorts);

// ---- latent-space probes ----------------------------------------------------

struct InterpolationPoint {
  double lambda = 0.0;
  ad::Tensor x;
  seq::DnaSequence sequence;
};

// z(l) = (1 - l) z1 + l z2 at `steps` evenly spaced l in [0, 1].
std::vector<InterpolationPoint> interpolate_latent(const models::Generator& gen,
                                                   const ad::Tensor& z1, const ad::Tensor& z2,
                                                   std::size_t steps,
                                                   const seq::Encoding& enc = {});

// Number of (point, position) pairs whose decoded base differs from the
// previous point.
std::size_t count_decode_changes(std::span<const InterpolationPoint> path);

void write_interpolation_tsv(std::ostream& out, std::span<const InterpolationPoint> path);

struct InvertConfig {
  std::size_t max_steps = 1000;
  double step_size = 0.1;
  double match_threshold = 0.95;
  std::size_t check_every = 10;
};

struct InversionResult {
  std::vector<ad::Tensor> latents;      // accepted points, verified by a forward pass
  std::vector<double> accepted_rates;   // decode match rate of each accepted point
  std::vector<double> all_rates;        // match rate of every start
  std::vector<std::string> warnings;
};

// Adam-minimizes the per-position cross-entropy between G(z) and the one-hot
// target from n_points standard-normal starts.
InversionResult invert_generator(const models::Generator& gen, const seq::DnaSequence& target,
                                 std::size_t n_points, std::uint64_t seed,
                                 const InvertConfig& cfg = {}, const seq::Encoding& enc = {});

// ---- logos ------------------------------------------------------------------

struct FrequencyMatrix {
  ad::Tensor freq;  // [L, 4], columns A, C, G, T
  std::size_t batch = 0;
};

FrequencyMatrix frequency_matrix(std::span<const seq::DnaSequence> seqs);

struct Logo {
  FrequencyMatrix freq;
  std::vector<double> info_bits;  // 2 - H(p) per position
};

Logo logo_matrix(std::span<const seq::DnaSequence> seqs);
Logo logo_from_frequencies(FrequencyMatrix freq);
void write_logo_tsv(std::ostream& out, const Logo& logo, long position_offset = 0);

// Decodes G(-z) for each latent and tabulates base frequencies.
FrequencyMatrix reflect_and_summarize(const models::Generator& gen,
                                      std::span<const ad::Tensor> latents,
                                      const seq::Encoding& enc = {});

// ---- complementation --------------------------------------------------------

struct ComplementationRecipe {
  seq::MotifDatasetSpec data;
  models::GeneratorSpec gen;
  models::DiscriminatorSpec disc;
  training::GanTrainConfig train;
  char target_base = 'G';
  std::size_t inversion_points = 16;
  InvertConfig invert;
};

struct ComplementationReport {
  std::string channel_order;
  std::uint64_t seed = 0;
  std::string target;
  std::size_t inverted = 0;
  FrequencyMatrix reflected;
  std::string modal_bases;
  std::vector<double> modal_freq;
  std::size_t complement_positions = 0;  // positions whose modal base is the target's complement
  bool complement_match = false;         // overall modal base equals the complement
};

// Trains a fresh model with the bases permuted onto channels by `enc`, inverts
// a repeated-base target and reflects the inverted latents.
ComplementationReport complementation_sweep(const seq::Encoding& enc,
                                            const ComplementationRecipe& recipe,
                                            std::uint64_t seed);

void write_complementation_tsv(std::ostream& out, std::span<const ComplementationReport> reports);

// ---- annotation tracks --------------------------------------------------------

// First and last index with value above the threshold.
std::optional<std::pair<std::size_t, std::size_t>> exon_spans(std::span<const double> track,
                                                              double threshold = 0.5);

// True when the above-threshold positions form exactly one run.
bool single_contiguous_span(std::span<const double> track, double threshold = 0.5);

struct BoundaryLogos {
  Logo start;  // window index flank is the first exon position
  Logo end;    // window index flank is the last exon position
  std::size_t aligned = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

// Stacks the +-flank windows around every detected span start and end.
BoundaryLogos align_boundary_logos(std::span<const seq::DnaSequence> seqs,
                                   std::span<const std::vector<double>> tracks, std::size_t flank,
                                   double threshold = 0.5);

// Offset (relative to the boundary) of the highest-information position.
long peak_information_offset(const Logo& logo, std::size_t flank);

// ---- motifs -------------------------------------------------------------------

struct MotifMatch {
  std::size_t position = 0;
  double score = 0.0;
};

std::vector<MotifMatch> motif_matches(const seq::DnaSequence& s, const models::Pwm& pwm,
                                      double threshold);

}  // namespace dnagen::eval
