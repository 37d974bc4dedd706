#include "dnagen/models/pwm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dnagen/error.hpp"
#include "dnagen/gradcore/nn.hpp"

namespace dnagen::models {

Pwm::Pwm(std::vector<Row> rows) : rows_(std::move(rows)) {
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    double s = 0.0;
    for (double v : rows_[k]) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError("PWM row " + std::to_string(k) + " has a negative or non-finite entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw ConfigError("PWM row " + std::to_string(k) + " sums to " + std::to_string(s));
  }
}

Pwm Pwm::delta(const seq::DnaSequence& consensus) {
  std::vector<Row> rows(consensus.size(), Row{});
  for (std::size_t k = 0; k < consensus.size(); ++k)
    rows[k][static_cast<std::size_t>(seq::base_index(consensus[k]))] = 1.0;
  return Pwm(std::move(rows));
}

Pwm Pwm::uniform(std::size_t k) { return Pwm(std::vector<Row>(k, Row{0.25, 0.25, 0.25, 0.25})); }

Pwm Pwm::random(std::size_t k, double peak, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> base(0, 3);
  std::vector<Row> rows(k);
  const double rest = (1.0 - peak) / 3.0;
  for (auto& r : rows) {
    r.fill(rest);
    r[static_cast<std::size_t>(base(rng))] = peak;
  }
  return Pwm(std::move(rows));
}

seq::DnaSequence Pwm::consensus() const {
  std::string s(rows_.size(), 'A');
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c)
      if (rows_[k][c] > rows_[k][best]) best = c;
    s[k] = seq::kBases[best];
  }
  return seq::DnaSequence(s);
}

seq::DnaSequence Pwm::sample(std::mt19937_64& rng) const {
  std::string s(rows_.size(), 'A');
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k < rows_.size(); ++k) {
    const double r = u(rng);
    double acc = 0.0;
    std::size_t pick = 3;
    for (std::size_t c = 0; c < 4; ++c) {
      acc += rows_[k][c];
      if (r < acc) {
        pick = c;
        break;
      }
    }
    // Guard against rounding leaving r above the accumulated mass.
    while (rows_[k][pick] == 0.0 && pick > 0) --pick;
    s[k] = seq::kBases[pick];
  }
  return seq::DnaSequence(s);
}

ad::Tensor Pwm::as_filters(const seq::Encoding& enc) const {
  ad::Tensor f({rows_.size(), 4, 1});
  for (std::size_t k = 0; k < rows_.size(); ++k)
    for (std::size_t b = 0; b < 4; ++b) f.at(k, enc.channel_of_base[b], 0) = rows_[k][b];
  return f;
}

Pwm Pwm::read_tsv(std::istream& in) {
  std::string line;
  bool header = false;
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    if (!header) {
      std::string a, c, g, t;
      ls >> a >> c >> g >> t;
      if (a.empty()) continue;
      if (a != "A" || c != "C" || g != "G" || t != "T")
        throw ConfigError("PWM table must start with the header 'A C G T'");
      header = true;
      continue;
    }
    Row r{};
    std::size_t n = 0;
    double v;
    while (n < 4 && ls >> v) r[n++] = v;
    if (n == 0) continue;
    std::string extra;
    if (n != 4 || (ls >> extra)) throw ConfigError("PWM rows need exactly 4 columns");
    rows.push_back(r);
  }
  if (!header) throw ConfigError("PWM table is missing its header");
  if (rows.empty()) throw ConfigError("PWM table has no rows");
  return Pwm(std::move(rows));
}

Pwm Pwm::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read PWM file " + path.string());
  return read_tsv(in);
}

void Pwm::write_tsv(std::ostream& out) const {
  out << "A\tC\tG\tT\n";
  out.precision(17);
  for (const auto& r : rows_) out << r[0] << '\t' << r[1] << '\t' << r[2] << '\t' << r[3] << '\n';
}

ad::Var pwm_score(ad::Var x, const Pwm& pwm, const seq::Encoding& enc) {
  const auto& s = x.shape();
  if ((s.size() != 2 && s.size() != 3) || s.back() != 4)
    throw DimensionError("pwm_score needs [L, 4] or [B, L, 4], got " + ad::to_string(s));
  const std::size_t l = s[s.size() - 2];
  if (pwm.size() == 0 || pwm.size() > l)
    throw DimensionError("PWM length " + std::to_string(pwm.size()) + " exceeds sequence length " +
                         std::to_string(l));
  ad::Var filters = x.graph().input(pwm.as_filters(enc));
  ad::Var windows = ad::conv1d(x, filters);  // [.., L - K + 1, 1]
  ad::Var best = ad::max_over_length(windows);  // [B, 1] or [1]
  if (s.size() == 2) return ad::reshape(best, {});
  return ad::reshape(best, {s[0]});
}

double pwm_score(const seq::DnaSequence& s, const Pwm& pwm) {
  if (pwm.size() == 0 || pwm.size() > s.size())
    throw DimensionError("PWM length " + std::to_string(pwm.size()) + " exceeds sequence length " +
                         std::to_string(s.size()));
  double best = -1.0;
  for (std::size_t p = 0; p + pwm.size() <= s.size(); ++p) {
    double v = 0.0;
    for (std::size_t k = 0; k < pwm.size(); ++k)
      v += pwm[k][static_cast<std::size_t>(seq::base_index(s[p + k]))];
    best = std::max(best, v);
  }
  return best;
}

}  // namespace dnagen::models
