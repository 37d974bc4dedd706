#include "dnagen/seqdata/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dnagen/error.hpp"
#include "dnagen/gradcore/nn.hpp"

namespace dnagen::seq {

namespace {

void window_runs(const std::string& body, std::size_t window, std::vector<DnaSequence>& out) {
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && base_index(body[i]) < 0) ++i;
    std::size_t j = i;
    while (j < body.size() && base_index(body[j]) >= 0) ++j;
    for (std::size_t p = i; p + window <= j; p += window)
      out.emplace_back(std::string_view(body).substr(p, window));
    i = j;
  }
}

}  // namespace

std::vector<DnaSequence> ingest_fasta(std::istream& in, std::size_t window,
                                      std::vector<std::string>* warnings) {
  if (window == 0) throw ConfigError("FASTA window length must be positive");
  std::vector<DnaSequence> out;
  std::string body, line;
  bool in_record = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '>') {
      window_runs(body, window, out);
      body.clear();
      in_record = true;
      continue;
    }
    if (!in_record) {
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      throw IoError("FASTA input has sequence data before the first '>' header");
    }
    for (char c : line) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      body.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  window_runs(body, window, out);
  if (out.empty() && warnings)
    warnings->push_back("FASTA input produced no clean windows of length " + std::to_string(window));
  return out;
}

std::vector<DnaSequence> ingest_fasta(const std::filesystem::path& path, std::size_t window,
                                      std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read FASTA file " + path.string());
  return ingest_fasta(in, window, warnings);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split label '" + s + "'");
}

void ScoredDataset::check() const {
  if (scores.size() != sequences.size() || splits.size() != sequences.size())
    throw DimensionError("scored dataset columns differ in length");
}

ScoredDataset ScoredDataset::subset(Split s) const {
  check();
  ScoredDataset out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (splits[i] != s) continue;
    out.sequences.push_back(sequences[i]);
    out.scores.push_back(scores[i]);
    out.splits.push_back(splits[i]);
  }
  return out;
}

std::vector<DnaSequence> ScoredDataset::sequences_in(Split s) const {
  return subset(s).sequences;
}

ScoredDataset ScoredDataset::read_tsv(std::istream& in) {
  ScoredDataset d;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    std::getline(ls, a, '\t');
    std::getline(ls, b, '\t');
    std::getline(ls, c, '\t');
    if (!header) {
      if (a != "sequence" || b != "score" || c != "split")
        throw ConfigError("dataset TSV must start with the header 'sequence score split'");
      header = true;
      continue;
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
      d.sequences.emplace_back(a);
      d.scores.push_back(v);
      d.splits.push_back(parse_split(c));
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad score on dataset line " + std::to_string(lineno));
    } catch (const EncodingError& e) {
      throw EncodingError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header) throw ConfigError("dataset TSV is missing its header");
  return d;
}

ScoredDataset ScoredDataset::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset " + path.string());
  return read_tsv(in);
}

void ScoredDataset::write_tsv(std::ostream& out) const {
  check();
  out << "sequence\tscore\tsplit\n";
  out.precision(17);
  for (std::size_t i = 0; i < size(); ++i)
    out << sequences[i].str() << '\t' << scores[i] << '\t' << to_string(splits[i]) << '\n';
}

void ScoredDataset::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset " + path.string());
  write_tsv(out);
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw ConfigError("need at least 10 items to split, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t nv = n / 10, nt = n / 10;
  SplitIndices s;
  s.valid.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nv));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(nv),
                idx.begin() + static_cast<std::ptrdiff_t>(nv + nt));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(nv + nt), idx.end());
  return s;
}

void assign_splits(ScoredDataset& data, std::uint64_t seed) {
  data.splits.assign(data.size(), Split::Train);
  const auto s = split_indices(data.size(), seed);
  for (auto i : s.valid) data.splits[i] = Split::Valid;
  for (auto i : s.test) data.splits[i] = Split::Test;
}

ScoredDataset percentile_filter(const ScoredDataset& data, double pct) {
  data.check();
  if (!(pct > 0.0 && pct <= 100.0)) throw ConfigError("percentile must lie in (0, 100]");
  if (data.size() == 0) return data;
  std::vector<double> sorted = data.scores;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(pct / 100.0 * static_cast<double>(sorted.size()) - 1e-9));
  const double cut = sorted[std::max<std::size_t>(rank, 1) - 1];
  ScoredDataset out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.scores[i] > cut) continue;
    out.sequences.push_back(data.sequences[i]);
    out.scores.push_back(data.scores[i]);
    out.splits.push_back(data.splits[i]);
  }
  return out;
}

namespace {

char draw_base(const BaseDistribution& p, std::mt19937_64& rng) {
  std::discrete_distribution<int> d(p.begin(), p.end());
  return kBases[static_cast<std::size_t>(d(rng))];
}

void check_distribution(const BaseDistribution& p, const char* what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ConfigError(std::string(what) + " has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ConfigError(std::string(what) + " does not sum to 1");
}

}  // namespace

std::vector<DnaSequence> random_sequences(std::size_t count, std::size_t length,
                                          std::mt19937_64& rng, const BaseDistribution& bases) {
  check_distribution(bases, "base distribution");
  std::discrete_distribution<int> d(bases.begin(), bases.end());
  std::vector<DnaSequence> out;
  out.reserve(count);
  std::string s(length, 'A');
  for (std::size_t n = 0; n < count; ++n) {
    for (auto& c : s) c = kBases[static_cast<std::size_t>(d(rng))];
    out.emplace_back(s);
  }
  return out;
}

AnnotatedSequences synth_motif_dataset(const MotifDatasetSpec& spec) {
  const std::size_t k = spec.pwm.size();
  if (k == 0 || k > spec.length)
    throw ConfigError("motif length " + std::to_string(k) + " does not fit sequence length " +
                      std::to_string(spec.length));
  if (!(spec.planting_prob >= 0.0 && spec.planting_prob <= 1.0))
    throw ConfigError("planting probability must lie in [0, 1]");
  check_distribution(spec.background, "background");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pos(0, spec.length - k);
  AnnotatedSequences out;
  std::string s(spec.length, 'A');
  for (std::size_t n = 0; n < spec.count; ++n) {
    for (auto& c : s) c = draw_base(spec.background, rng);
    std::vector<double> track(spec.length, 0.0);
    std::optional<std::size_t> start;
    if (u(rng) < spec.planting_prob) {
      const std::size_t p = pos(rng);
      const auto motif = spec.pwm.sample(rng);
      for (std::size_t j = 0; j < k; ++j) {
        s[p + j] = motif[j];
        track[p + j] = 1.0;
      }
      start = p;
    }
    out.sequences.emplace_back(s);
    out.tracks.push_back(std::move(track));
    out.starts.push_back(start);
  }
  return out;
}

AnnotatedSequences synth_exon_dataset(const ExonDatasetSpec& spec) {
  check_distribution(spec.intron, "intron composition");
  check_distribution(spec.exon, "exon composition");
  const std::size_t k = spec.start_motif.size();
  if (k > 0 && spec.start_anchor >= k) throw ConfigError("start anchor lies outside the motif");
  if (spec.min_exon == 0 || spec.min_exon > spec.max_exon)
    throw ConfigError("exon length range is empty");
  // The motif must fit on both sides of the exon start.
  const std::size_t lead = k > 0 ? spec.start_anchor : 0;
  const std::size_t tail = k > 0 ? k - spec.start_anchor : 0;
  if (lead + std::max(spec.max_exon, tail) + 1 > spec.length)
    throw ConfigError("exon spans and motif do not fit sequence length " +
                      std::to_string(spec.length));
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> exon_len(spec.min_exon, spec.max_exon);
  AnnotatedSequences out;
  std::string s(spec.length, 'A');
  for (std::size_t n = 0; n < spec.count; ++n) {
    const std::size_t len = exon_len(rng);
    // At least one intron base on each side of the exon.
    const std::size_t lo = std::max<std::size_t>(1, lead);
    const std::size_t hi = spec.length - std::max(len + 1, tail);
    const std::size_t start = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    std::vector<double> track(spec.length, 0.0);
    for (std::size_t i = 0; i < spec.length; ++i) {
      const bool inside = i >= start && i < start + len;
      s[i] = draw_base(inside ? spec.exon : spec.intron, rng);
      track[i] = inside ? 1.0 : 0.0;
    }
    if (k > 0) {
      const auto motif = spec.start_motif.sample(rng);
      for (std::size_t j = 0; j < k; ++j) s[start - spec.start_anchor + j] = motif[j];
    }
    out.sequences.emplace_back(s);
    out.tracks.push_back(std::move(track));
    out.starts.push_back(start);
  }
  return out;
}

ad::Tensor encode_annotated(const AnnotatedSequences& data) {
  const std::size_t b = data.sequences.size();
  const std::size_t l = b ? data.sequences.front().size() : 0;
  if (data.tracks.size() != b) throw DimensionError("tracks and sequences differ in count");
  ad::Tensor x({b, l, 5});
  for (std::size_t n = 0; n < b; ++n) {
    if (data.sequences[n].size() != l || data.tracks[n].size() != l)
      throw DimensionError("annotated sequences differ in length");
    for (std::size_t i = 0; i < l; ++i) {
      x.at(n, i, static_cast<std::size_t>(base_index(data.sequences[n][i]))) = 1.0;
      x.at(n, i, 4) = data.tracks[n][i];
    }
  }
  return x;
}

// ---- oracle -----------------------------------------------------------------

SyntheticOracle::SyntheticOracle(std::vector<models::Pwm> motifs, std::vector<double> weights,
                                 double scale, double shift)
    : motifs_(std::move(motifs)), weights_(std::move(weights)), scale_(scale), shift_(shift) {
  if (motifs_.empty()) throw ConfigError("oracle needs at least one motif");
  if (motifs_.size() != weights_.size()) throw ConfigError("oracle motif/weight count mismatch");
  if (!std::isfinite(scale_) || !std::isfinite(shift_))
    throw ConfigError("oracle output stage must be finite");
}

SyntheticOracle SyntheticOracle::random(std::size_t motifs, std::size_t motif_length,
                                        std::size_t probe_length, std::uint64_t seed) {
  if (motif_length > probe_length) throw ConfigError("oracle motifs longer than probes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.5, 1.5);
  std::vector<models::Pwm> pwms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < motifs; ++i) {
    pwms.push_back(models::Pwm::random(motif_length, 0.85, rng));
    weights.push_back(w(rng));
  }
  SyntheticOracle o(std::move(pwms), std::move(weights), 1.0, 0.0);
  o.calibrate(probe_length, 4000, seed ^ 0x9e3779b97f4a7c15ULL);
  return o;
}

SyntheticOracle SyntheticOracle::related(const SyntheticOracle& base, std::size_t shared,
                                         std::size_t probe_length, std::uint64_t seed) {
  if (shared > base.motifs_.size()) throw ConfigError("cannot share more motifs than exist");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.5, 1.5);
  std::vector<models::Pwm> pwms(base.motifs_.begin(),
                                base.motifs_.begin() + static_cast<std::ptrdiff_t>(shared));
  std::vector<double> weights(base.weights_.begin(),
                              base.weights_.begin() + static_cast<std::ptrdiff_t>(shared));
  const std::size_t k = base.motifs_.front().size();
  for (std::size_t i = shared; i < base.motifs_.size(); ++i) {
    pwms.push_back(models::Pwm::random(k, 0.85, rng));
    weights.push_back(w(rng));
  }
  SyntheticOracle o(std::move(pwms), std::move(weights), 1.0, 0.0);
  o.calibrate(probe_length, 4000, seed ^ 0x9e3779b97f4a7c15ULL);
  return o;
}

void SyntheticOracle::calibrate(std::size_t probe_length, std::size_t probes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto seqs = random_sequences(probes, probe_length, rng);
  std::vector<double> r;
  r.reserve(seqs.size());
  for (const auto& s : seqs) r.push_back(raw(s));
  std::sort(r.begin(), r.end());
  auto nearest = [&](double pct) {
    const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(r.size())));
    return r[std::max<std::size_t>(rank, 1) - 1];
  };
  const double lo = nearest(2.0), hi = nearest(98.0);
  if (!(hi - lo > 1e-9)) throw ConfigError("oracle calibration failed: raw scores do not vary");
  const double logit_hi = std::log(0.9 / 0.1);
  scale_ = 2.0 * logit_hi / (hi - lo);
  shift_ = -logit_hi - scale_ * lo;
}

double SyntheticOracle::raw(const DnaSequence& s) const {
  double t = 0.0;
  for (std::size_t i = 0; i < motifs_.size(); ++i) t += weights_[i] * models::pwm_score(s, motifs_[i]);
  return t;
}

double SyntheticOracle::score(const DnaSequence& s) const {
  return 1.0 / (1.0 + std::exp(-(scale_ * raw(s) + shift_)));
}

std::vector<double> SyntheticOracle::score(const std::vector<DnaSequence>& s) const {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& x : s) out.push_back(score(x));
  return out;
}

ad::Var SyntheticOracle::forward(ad::Var x) const {
  ad::Var t;
  for (std::size_t i = 0; i < motifs_.size(); ++i) {
    ad::Var term = ad::scale(models::pwm_score(x, motifs_[i]), weights_[i]);
    t = t.valid() ? ad::add(t, term) : term;
  }
  return ad::sigmoid(ad::affine(t, scale_, shift_));
}

DnaSequence SyntheticOracle::strongest_consensus() const {
  const auto it = std::max_element(weights_.begin(), weights_.end());
  return motifs_[static_cast<std::size_t>(it - weights_.begin())].consensus();
}

std::string SyntheticOracle::to_json() const {
  nlohmann::json j;
  j["format"] = "dnagen-oracle";
  j["version"] = 1;
  j["scale"] = scale_;
  j["shift"] = shift_;
  j["weights"] = weights_;
  auto& m = j["motifs"] = nlohmann::json::array();
  for (const auto& p : motifs_) {
    auto rows = nlohmann::json::array();
    for (const auto& r : p.rows()) rows.push_back(std::vector<double>(r.begin(), r.end()));
    m.push_back(rows);
  }
  return j.dump(1);
}

SyntheticOracle SyntheticOracle::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "dnagen-oracle" || j.at("version") != 1)
      throw CheckpointError("not a version-1 oracle file");
    std::vector<models::Pwm> motifs;
    for (const auto& m : j.at("motifs")) {
      std::vector<models::Pwm::Row> rows;
      for (const auto& r : m) {
        const auto v = r.get<std::vector<double>>();
        if (v.size() != 4) throw CheckpointError("oracle motif rows need 4 entries");
        rows.push_back({v[0], v[1], v[2], v[3]});
      }
      motifs.emplace_back(std::move(rows));
    }
    return SyntheticOracle(std::move(motifs), j.at("weights").get<std::vector<double>>(),
                           j.at("scale").get<double>(), j.at("shift").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed oracle file: ") + e.what());
  }
}

void SyntheticOracle::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write oracle " + path.string());
  out << to_json() << '\n';
}

SyntheticOracle SyntheticOracle::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read oracle " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

ScoredDataset synth_binding_data(const SyntheticOracle& oracle, std::size_t count,
                                 std::size_t length, std::uint64_t seed) {
  constexpr int kAttempts = 8;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt) * 0x100000001b3ULL);
    ScoredDataset d;
    d.sequences = random_sequences(count, length, rng);
    d.scores = oracle.score(d.sequences);
    const auto [lo, hi] = std::minmax_element(d.scores.begin(), d.scores.end());
    if (count == 0 || *lo >= 0.2 || *hi <= 0.8) continue;
    assign_splits(d, seed);
    return d;
  }
  throw ConfigError("synthetic binding data never spanned [0.2, 0.8] after " +
                    std::to_string(kAttempts) + " draws");
}

}  // namespace dnagen::seq
