#include "dnagen/evalkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dnagen/error.hpp"
#include "dnagen/gradcore/nn.hpp"

namespace dnagen::eval {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

DistanceDistribution distance_distribution(std::span<const seq::DnaSequence> queries,
                                           std::span<const seq::DnaSequence> reference,
                                           bool exclude_self) {
  if (reference.empty()) throw ConfigError("distance reference set is empty");
  if (exclude_self && reference.size() < 2)
    throw ConfigError("excluding self leaves an empty reference set");
  if (exclude_self && queries.size() != reference.size())
    throw ConfigError("excluding self needs the query set to be the reference set");
  DistanceDistribution d;
  d.minima.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t r = 0; r < reference.size() && best > 0; ++r) {
      if (exclude_self && r == q) continue;
      best = std::min(best, edit_distance(queries[q], reference[r]));
    }
    d.minima.push_back(best);
    if (d.histogram.size() <= best) d.histogram.resize(best + 1, 0);
    ++d.histogram[best];
  }
  if (!d.minima.empty())
    d.mean = static_cast<double>(std::accumulate(d.minima.begin(), d.minima.end(), std::size_t{0})) /
             static_cast<double>(d.minima.size());
  return d;
}

void write_histogram_tsv(std::ostream& out,
                         const std::vector<std::pair<std::string, DistanceDistribution>>& cohorts) {
  out << "distance\tcount\tcohort\n";
  for (const auto& [name, d] : cohorts)
    for (std::size_t k = 0; k < d.histogram.size(); ++k)
      out << k << '\t' << d.histogram[k] << '\t' << name << '\n';
}

std::vector<InterpolationPoint> interpolate_latent(const models::Generator& gen,
                                                   const ad::Tensor& z1, const ad::Tensor& z2,
                                                   std::size_t steps, const seq::Encoding& enc) {
  if (steps < 2) throw ConfigError("interpolation needs at least 2 steps");
  const std::size_t d = gen.spec.latent_dim;
  if (z1.shape() != ad::Shape{d} || z2.shape() != ad::Shape{d})
    throw DimensionError("interpolation endpoints must be [" + std::to_string(d) + "] vectors");
  ad::Tensor zs({steps, d});
  std::vector<double> lambdas(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double l = static_cast<double>(s) / static_cast<double>(steps - 1);
    lambdas[s] = l;
    for (std::size_t k = 0; k < d; ++k) zs.at(s, k) = (1.0 - l) * z1[k] + l * z2[k];
  }
  const ad::Tensor x = models::generate(gen, zs);
  const std::size_t per = x.size() / steps;
  const ad::Shape single(x.shape().begin() + 1, x.shape().end());
  std::vector<InterpolationPoint> out;
  for (std::size_t s = 0; s < steps; ++s) {
    ad::Tensor xs(single, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(s * per),
                                              x.data().begin() + static_cast<std::ptrdiff_t>((s + 1) * per)));
    auto decoded = seq::decode_argmax(xs, enc);
    out.push_back({lambdas[s], std::move(xs), std::move(decoded)});
  }
  return out;
}

std::size_t count_decode_changes(std::span<const InterpolationPoint> path) {
  std::size_t n = 0;
  for (std::size_t s = 1; s < path.size(); ++s)
    for (std::size_t i = 0; i < path[s].sequence.size(); ++i)
      n += path[s].sequence[i] != path[s - 1].sequence[i] ? 1 : 0;
  return n;
}

void write_interpolation_tsv(std::ostream& out, std::span<const InterpolationPoint> path) {
  out << "step\tlambda\tsequence\tone_hotness\n";
  out.precision(17);
  for (std::size_t s = 0; s < path.size(); ++s)
    out << s << '\t' << path[s].lambda << '\t' << path[s].sequence.str() << '\t'
        << training::one_hotness(path[s].x) << '\n';
}

namespace {

double match_rate(const seq::DnaSequence& a, const seq::DnaSequence& b) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
  return a.size() ? static_cast<double>(same) / static_cast<double>(a.size()) : 1.0;
}

}  // namespace

InversionResult invert_generator(const models::Generator& gen, const seq::DnaSequence& target,
                                 std::size_t n_points, std::uint64_t seed,
                                 const InvertConfig& cfg, const seq::Encoding& enc) {
  InversionResult res;
  if (target.size() != gen.spec.length)
    throw DimensionError("inversion target has length " + std::to_string(target.size()) +
                         ", generator makes " + std::to_string(gen.spec.length));
  if (n_points == 0) return res;
  const std::size_t d = gen.spec.latent_dim, l = gen.spec.length, c = gen.spec.out_channels();
  std::mt19937_64 rng(seed);
  ad::Tensor z = training::sample_latent(n_points, d, rng);
  auto adam = ad::make_adam_state({cfg.step_size, 0.9, 0.999, 1e-8}, std::span<const ad::Tensor>(&z, 1));

  // Indices of the target channel at every position of every point.
  std::vector<std::size_t> pick;
  pick.reserve(n_points * l);
  for (std::size_t n = 0; n < n_points; ++n)
    for (std::size_t i = 0; i < l; ++i)
      pick.push_back((n * l + i) * c + enc.channel_of_base[static_cast<std::size_t>(seq::base_index(target[i]))]);

  auto rates_of = [&](const ad::Tensor& x) {
    const auto seqs = seq::decode_batch(x, enc);
    std::vector<double> r;
    for (const auto& s : seqs) r.push_back(match_rate(s, target));
    return r;
  };

  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    ad::Graph g;
    const auto params = gen.params.bind(g);
    ad::Var zv = g.input(z);
    ad::Var x = models::generator_forward(gen.spec, params, zv);
    if (cfg.check_every && step % cfg.check_every == 0) {
      const auto r = rates_of(x.value());
      if (std::all_of(r.begin(), r.end(), [&](double v) { return v >= cfg.match_threshold; })) break;
    }
    ad::Var p = ad::select(x, pick, {n_points * l});
    // Output probabilities are strictly positive (softmax), so log is defined.
    ad::Var loss = ad::neg(ad::sum_all(ad::log(p)));
    const ad::Tensor grad = g.grad(loss, zv).value();
    ad::adam_step(std::span<ad::Tensor>(&z, 1), std::span<const ad::Tensor>(&grad, 1), adam);
  }

  // Acceptance rests on a fresh forward pass, not on optimizer state.
  const ad::Tensor x = models::generate(gen, z);
  res.all_rates = rates_of(x);
  for (std::size_t n = 0; n < n_points; ++n) {
    if (res.all_rates[n] < cfg.match_threshold) continue;
    res.latents.emplace_back(ad::Shape{d}, std::vector<double>(z.data().begin() + static_cast<std::ptrdiff_t>(n * d),
                                                                 z.data().begin() + static_cast<std::ptrdiff_t>((n + 1) * d)));
    res.accepted_rates.push_back(res.all_rates[n]);
  }
  if (res.latents.empty())
    res.warnings.push_back("no latent point reached a " + std::to_string(cfg.match_threshold) +
                           " decode match; returning none of " + std::to_string(n_points));
  return res;
}

FrequencyMatrix frequency_matrix(std::span<const seq::DnaSequence> seqs) {
  if (seqs.empty()) throw ConfigError("frequency matrix of an empty batch");
  const std::size_t l = seqs.front().size();
  FrequencyMatrix f{ad::Tensor({l, 4}), seqs.size()};
  for (const auto& s : seqs) {
    if (s.size() != l) throw DimensionError("logo sequences differ in length");
    for (std::size_t i = 0; i < l; ++i) f.freq.at(i, static_cast<std::size_t>(seq::base_index(s[i]))) += 1.0;
  }
  for (auto& v : f.freq.data()) v /= static_cast<double>(seqs.size());
  return f;
}

Logo logo_from_frequencies(FrequencyMatrix freq) {
  Logo logo{std::move(freq), {}};
  const std::size_t l = logo.freq.freq.dim(0);
  for (std::size_t i = 0; i < l; ++i) {
    double h = 0.0;
    for (std::size_t b = 0; b < 4; ++b) {
      const double p = logo.freq.freq.at(i, b);
      if (p > 0.0) h -= p * std::log2(p);
    }
    logo.info_bits.push_back(std::clamp(2.0 - h, 0.0, 2.0));
  }
  return logo;
}

Logo logo_matrix(std::span<const seq::DnaSequence> seqs) {
  return logo_from_frequencies(frequency_matrix(seqs));
}

void write_logo_tsv(std::ostream& out, const Logo& logo, long position_offset) {
  out << "position\tfreq_A\tfreq_C\tfreq_G\tfreq_T\tinfo_bits\n";
  out.precision(17);
  for (std::size_t i = 0; i < logo.info_bits.size(); ++i) {
    out << static_cast<long>(i) + position_offset;
    for (std::size_t b = 0; b < 4; ++b) out << '\t' << logo.freq.freq.at(i, b);
    out << '\t' << logo.info_bits[i] << '\n';
  }
}

FrequencyMatrix reflect_and_summarize(const models::Generator& gen,
                                      std::span<const ad::Tensor> latents,
                                      const seq::Encoding& enc) {
  if (latents.empty()) throw ConfigError("reflection needs at least one latent point");
  const std::size_t d = gen.spec.latent_dim;
  ad::Tensor z({latents.size(), d});
  for (std::size_t n = 0; n < latents.size(); ++n) {
    if (latents[n].size() != d) throw DimensionError("latent point has the wrong dimension");
    for (std::size_t k = 0; k < d; ++k) z.at(n, k) = -latents[n][k];
  }
  const auto seqs = seq::decode_batch(models::generate(gen, z), enc);
  return frequency_matrix(seqs);
}

ComplementationReport complementation_sweep(const seq::Encoding& enc,
                                            const ComplementationRecipe& recipe,
                                            std::uint64_t seed) {
  if (seq::base_index(recipe.target_base) < 0)
    throw ConfigError("complementation target base must be one of A, C, G, T");
  auto spec = recipe.data;
  spec.seed = seed;
  const auto data = seq::synth_motif_dataset(spec);
  auto cfg = recipe.train;
  cfg.seed = seed;
  const auto trained =
      training::train_wgan(seq::encode_batch(data.sequences, enc), recipe.gen, recipe.disc, cfg);

  ComplementationReport rep;
  rep.channel_order = enc.channel_order();
  rep.seed = seed;
  rep.target = std::string(recipe.gen.length, recipe.target_base);
  const seq::DnaSequence target(rep.target);
  const auto inv =
      invert_generator(trained.gen, target, recipe.inversion_points, seed, recipe.invert, enc);
  rep.inverted = inv.latents.size();
  if (inv.latents.empty()) return rep;
  rep.reflected = reflect_and_summarize(trained.gen, inv.latents, enc);
  const char comp = seq::complement(recipe.target_base);
  std::array<double, 4> total{};
  for (std::size_t i = 0; i < rep.reflected.freq.dim(0); ++i) {
    std::size_t best = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      total[b] += rep.reflected.freq.at(i, b);
      if (rep.reflected.freq.at(i, b) > rep.reflected.freq.at(i, best)) best = b;
    }
    rep.modal_bases.push_back(seq::kBases[best]);
    rep.modal_freq.push_back(rep.reflected.freq.at(i, best));
    rep.complement_positions += seq::kBases[best] == comp ? 1 : 0;
  }
  const auto overall = static_cast<std::size_t>(std::max_element(total.begin(), total.end()) - total.begin());
  rep.complement_match = seq::kBases[overall] == comp;
  return rep;
}

void write_complementation_tsv(std::ostream& out, std::span<const ComplementationReport> reports) {
  out << "channel_order\tseed\ttarget\tinverted\tposition\tmodal_base\tmodal_freq\tcomplement_match\n";
  out.precision(17);
  for (const auto& r : reports) {
    if (r.modal_bases.empty()) {
      out << r.channel_order << '\t' << r.seed << '\t' << r.target << '\t' << r.inverted
          << "\tNA\tNA\tNA\t" << (r.complement_match ? 1 : 0) << '\n';
      continue;
    }
    for (std::size_t i = 0; i < r.modal_bases.size(); ++i)
      out << r.channel_order << '\t' << r.seed << '\t' << r.target << '\t' << r.inverted << '\t'
          << i << '\t' << r.modal_bases[i] << '\t' << r.modal_freq[i] << '\t'
          << (r.complement_match ? 1 : 0) << '\n';
  }
}

std::optional<std::pair<std::size_t, std::size_t>> exon_spans(std::span<const double> track,
                                                              double threshold) {
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (track[i] > threshold) {
      if (!first) first = i;
      last = i;
    }
  }
  if (!first) return std::nullopt;
  return std::pair{*first, *last};
}

bool single_contiguous_span(std::span<const double> track, double threshold) {
  const auto span = exon_spans(track, threshold);
  if (!span) return false;
  for (std::size_t i = span->first; i <= span->second; ++i)
    if (!(track[i] > threshold)) return false;
  return true;
}

BoundaryLogos align_boundary_logos(std::span<const seq::DnaSequence> seqs,
                                   std::span<const std::vector<double>> tracks, std::size_t flank,
                                   double threshold) {
  if (seqs.size() != tracks.size()) throw DimensionError("sequences and tracks differ in count");
  BoundaryLogos out;
  std::vector<seq::DnaSequence> starts, ends;
  const std::size_t w = 2 * flank + 1;
  for (std::size_t n = 0; n < seqs.size(); ++n) {
    const auto span = exon_spans(tracks[n], threshold);
    const std::size_t l = seqs[n].size();
    if (!span || span->first < flank || span->first + flank >= l || span->second < flank ||
        span->second + flank >= l) {
      ++out.skipped;
      continue;
    }
    starts.emplace_back(seqs[n].str().substr(span->first - flank, w));
    ends.emplace_back(seqs[n].str().substr(span->second - flank, w));
    ++out.aligned;
  }
  if (out.aligned == 0) {
    out.warnings.push_back("no sequence had a boundary window inside its bounds");
    return out;
  }
  out.start = logo_matrix(starts);
  out.end = logo_matrix(ends);
  return out;
}

long peak_information_offset(const Logo& logo, std::size_t flank) {
  if (logo.info_bits.empty()) throw ConfigError("empty logo");
  const auto it = std::max_element(logo.info_bits.begin(), logo.info_bits.end());
  return static_cast<long>(it - logo.info_bits.begin()) - static_cast<long>(flank);
}

std::vector<MotifMatch> motif_matches(const seq::DnaSequence& s, const models::Pwm& pwm,
                                      double threshold) {
  if (pwm.size() == 0 || pwm.size() > s.size())
    throw DimensionError("motif length " + std::to_string(pwm.size()) + " exceeds sequence length " +
                         std::to_string(s.size()));
  std::vector<MotifMatch> out;
  for (std::size_t p = 0; p + pwm.size() <= s.size(); ++p) {
    double v = 0.0;
    for (std::size_t k = 0; k < pwm.size(); ++k)
      v += pwm[k][static_cast<std::size_t>(seq::base_index(s[p + k]))];
    if (v >= threshold) out.push_back({p, v});
  }
  return out;
}

}  // namespace dnagen::eval
