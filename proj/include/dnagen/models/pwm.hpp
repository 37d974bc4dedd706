#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

#include "dnagen/gradcore/graph.hpp"
#include "dnagen/seqdata/sequence.hpp"

namespace dnagen::models {

// Position weight matrix: K rows, each a distribution over (A, C, G, T).
class Pwm {
 public:
  using Row = std::array<double, 4>;

  Pwm() = default;
  // Rows must be non-negative and sum to 1 within 1e-9.
  explicit Pwm(std::vector<Row> rows);

  // One-hot rows spelling the given consensus.
  static Pwm delta(const seq::DnaSequence& consensus);
  static Pwm uniform(std::size_t k);
  // Dirichlet-like random motif: each row puts `peak` mass on one base.
  static Pwm random(std::size_t k, double peak, std::mt19937_64& rng);

  std::size_t size() const noexcept { return rows_.size(); }
  const Row& operator[](std::size_t k) const { return rows_[k]; }
  const std::vector<Row>& rows() const noexcept { return rows_; }

  seq::DnaSequence consensus() const;
  // Draws one K-mer column by column.
  seq::DnaSequence sample(std::mt19937_64& rng) const;

  // [K, 4, 1] convolution filters laid out for the given encoding.
  ad::Tensor as_filters(const seq::Encoding& enc = {}) const;

  // Whitespace-separated table with a header line "A C G T".
  static Pwm read_tsv(std::istream& in);
  static Pwm load_tsv(const std::filesystem::path& path);
  void write_tsv(std::ostream& out) const;

 private:
  std::vector<Row> rows_;
};

// Best window inner product: max_p sum_{k,c} x[p + k, c] * pwm[k, c].
// x: [L, 4] -> scalar, or [B, L, 4] -> [B]. The gradient flows to the best
// window, the lowest position on ties. Throws DimensionError when K > L.
ad::Var pwm_score(ad::Var x, const Pwm& pwm, const seq::Encoding& enc = {});

// Same score for a discrete sequence, computed directly.
double pwm_score(const seq::DnaSequence& s, const Pwm& pwm);

}  // namespace dnagen::models
