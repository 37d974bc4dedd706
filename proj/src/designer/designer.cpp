#include "dnagen/designer/designer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

#include "dnagen/error.hpp"
#include "dnagen/evalkit/evalkit.hpp"
#include "dnagen/gradcore/adam.hpp"
#include "dnagen/gradcore/nn.hpp"

namespace dnagen::design {

double Scorer::score(const seq::DnaSequence& s) const {
  ad::Graph g;
  return forward(g.input(seq::encode_onehot(s))).item();
}

PwmScorer::PwmScorer(models::Pwm pwm, std::string name) : pwm_(std::move(pwm)), name_(std::move(name)) {}
ad::Var PwmScorer::forward(ad::Var x) const { return models::pwm_score(x, pwm_); }

PredictorScorer::PredictorScorer(models::Predictor p, std::string name)
    : p_(std::move(p)), name_(std::move(name)) {}

ad::Var PredictorScorer::forward(ad::Var x) const {
  const auto params = p_.params.bind(x.graph());
  return models::predictor_forward(p_.spec, params, x);
}

OracleScorer::OracleScorer(seq::SyntheticOracle o, std::string name)
    : o_(std::move(o)), name_(std::move(name)) {}
ad::Var OracleScorer::forward(ad::Var x) const { return o_.forward(x); }

ChannelMassScorer::ChannelMassScorer(std::size_t channel, std::string name)
    : channel_(channel), name_(std::move(name)) {
  if (channel >= 4) throw ConfigError("channel must be 0..3");
}

ad::Var ChannelMassScorer::forward(ad::Var x) const {
  const auto& s = x.shape();
  if ((s.size() != 2 && s.size() != 3) || s.back() != 4)
    throw DimensionError("channel mass needs [L, 4] or [B, L, 4], got " + ad::to_string(s));
  ad::Var col = ad::slice_last(x, channel_, channel_ + 1);
  if (s.size() == 2) return ad::sum_all(col);
  return ad::sum_last(ad::reshape(col, {s[0], s[1]}));
}

void Objective::check() const {
  if (terms.empty()) throw ConfigError("objective needs at least one term");
  for (const auto& t : terms) {
    if (!t.scorer) throw ConfigError("objective term without a scorer");
    if (!std::isfinite(t.weight)) throw ConfigError("objective weights must be finite");
    if (t.sign != 1 && t.sign != -1) throw ConfigError("objective term sign must be +1 or -1");
  }
}

ad::Var objective_eval(ad::Var x, const Objective& obj, std::vector<ad::Var>* per_term) {
  obj.check();
  const auto& s = x.shape();
  if (s.size() != 2 && s.size() != 3)
    throw DimensionError("objective input must be [L, C] or [B, L, C], got " + ad::to_string(s));
  if (s.back() < 4) throw DimensionError("objective input needs at least 4 channels");
  if (s.back() > 4) x = ad::slice_last(x, 0, 4);
  const std::size_t l = s[s.size() - 2];
  ad::Var t;
  for (const auto& term : obj.terms) {
    if (auto need = term.scorer->length(); need && *need != l)
      throw DimensionError("scorer " + term.scorer->name() + " expects length " +
                           std::to_string(*need) + ", got " + std::to_string(l));
    ad::Var f = term.scorer->forward(x);
    if (per_term) per_term->push_back(f);
    ad::Var w = ad::scale(f, term.weight * term.sign);
    t = t.valid() ? ad::add(t, w) : w;
  }
  return t;
}

void DesignConfig::check() const {
  if (!(step_size >= 0.0) || !std::isfinite(step_size))
    throw ConfigError("design.step_size must be a non-negative number");
  if (!(noise_std >= 0.0)) throw ConfigError("design.noise_std must be non-negative");
  if (!(prior_weight >= 0.0)) throw ConfigError("design.prior_weight must be non-negative");
  if (restarts == 0) throw ConfigError("design.restarts must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("design Adam decay rates must lie in [0, 1)");
}

std::size_t DesignResult::succeeded() const {
  return static_cast<std::size_t>(
      std::count_if(restarts.begin(), restarts.end(), [](const auto& r) { return r.ok; }));
}

namespace {

// Maps a batch of latents [B, ...] to relaxed sequences [B, L, C].
using Forward = std::function<ad::Var(ad::Graph&, ad::Var)>;

struct RestartState {
  ad::Tensor z;
  ad::AdamState adam;
  std::mt19937_64 rng;
  std::size_t streak = 0;
  bool active = true;
};

ad::Tensor stack(const std::vector<RestartState>& st, const std::vector<std::size_t>& which,
                 const ad::Shape& single) {
  ad::Shape s{which.size()};
  s.insert(s.end(), single.begin(), single.end());
  ad::Tensor out(s);
  const std::size_t per = ad::numel(single);
  for (std::size_t i = 0; i < which.size(); ++i)
    std::copy(st[which[i]].z.data().begin(), st[which[i]].z.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  return out;
}

DesignResult run_design(const Forward& fwd, const ad::Shape& zshape, const Objective& obj,
                        const DesignConfig& cfg) {
  cfg.check();
  obj.check();
  DesignResult res;
  for (const auto& t : obj.terms) res.term_names.push_back(t.scorer->name());

  const std::size_t per = ad::numel(zshape);
  const ad::AdamConfig acfg{cfg.step_size, cfg.beta1, cfg.beta2, 1e-8};
  std::vector<RestartState> st(cfg.restarts);
  res.restarts.resize(cfg.restarts);
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    // Each restart owns a stream derived from (seed, restart).
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(r), 0x64657369u};
    st[r].rng.seed(seq);
    std::normal_distribution<double> nd(0.0, 1.0);
    st[r].z = ad::Tensor(zshape);
    for (auto& v : st[r].z.data()) v = nd(st[r].rng);
    const ad::Tensor* p = &st[r].z;
    st[r].adam = ad::make_adam_state(acfg, std::span<const ad::Tensor>(p, 1));
    res.restarts[r].restart = r;
  }

  auto fail = [&](std::size_t r, const std::string& why) {
    st[r].active = false;
    res.restarts[r].ok = false;
    res.restarts[r].error = why;
  };

  for (std::size_t step = 0; step < cfg.max_steps;) {
    std::vector<std::size_t> act;
    for (std::size_t r = 0; r < st.size(); ++r) {
      if (!st[r].active) continue;
      if (!st[r].z.all_finite()) {
        fail(r, "latent became non-finite at step " + std::to_string(step));
        continue;
      }
      act.push_back(r);
    }
    if (act.empty()) break;
    ad::Graph g;
    ad::Var zb = g.input(stack(st, act, zshape));
    ad::Var t = objective_eval(fwd(g, zb), obj);
    const auto tv = t.value().data();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < act.size(); ++i) {
      if (std::isfinite(tv[i])) {
        keep.push_back(i);
      } else {
        fail(act[i], "non-finite objective at step " + std::to_string(step));
      }
    }
    if (keep.size() != act.size()) continue;  // redo the step without the failed restarts

    // Rows are independent, so the gradient of the sum holds each restart's
    // own gradient.
    const ad::Tensor grad = g.grad(ad::sum_all(t), zb).value();
    for (std::size_t i = 0; i < act.size(); ++i) {
      const std::size_t r = act[i];
      auto& rs = st[r];
      auto& out = res.restarts[r];
      const double prev = out.trajectory.empty() ? tv[i] : out.trajectory.back();
      out.trajectory.push_back(tv[i]);
      if (out.trajectory.size() > 1 && std::abs(tv[i] - prev) < cfg.tolerance) {
        if (++rs.streak >= cfg.patience) {
          rs.active = false;
          continue;
        }
      } else {
        rs.streak = 0;
      }
      ad::Tensor gi(zshape, std::vector<double>(grad.data().begin() + static_cast<std::ptrdiff_t>(i * per),
                                                grad.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
      if (cfg.plain_steps) {
        for (std::size_t k = 0; k < per; ++k) rs.z[k] += cfg.step_size * gi[k];
      } else {
        ad::adam_step(std::span<ad::Tensor>(&rs.z, 1), std::span<const ad::Tensor>(&gi, 1), rs.adam,
                      true);
      }
      if (cfg.prior_weight > 0.0)
        for (std::size_t k = 0; k < per; ++k) rs.z[k] -= cfg.prior_weight * rs.z[k];
      if (cfg.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_std);
        for (auto& v : rs.z.data()) v += noise(rs.rng);
      }
    }
    ++step;
  }

  for (std::size_t r = 0; r < st.size(); ++r) {
    auto& out = res.restarts[r];
    out.steps = out.trajectory.size();
    out.z = st[r].z;
    if (!out.ok) continue;
    try {
      ad::Graph g;
      ad::Var x = fwd(g, g.input(stack(st, {r}, zshape)));
      const double t = objective_eval(x, obj).value()[0];
      if (!std::isfinite(t)) {
        fail(r, "non-finite final objective");
        continue;
      }
      out.final_t = t;
      const ad::Tensor xv = x.value();
      ad::Shape single(xv.shape().begin() + 1, xv.shape().end());
      out.x = xv.reshaped(single);
      out.sequence = seq::decode_argmax(out.x);
      for (const auto& term : obj.terms) out.term_scores.push_back(term.scorer->score(out.sequence));
    } catch (const NumericError& e) {
      fail(r, e.what());
    }
  }
  return res;
}

}  // namespace

DesignResult direct_design(const Objective& obj, std::size_t length, const DesignConfig& cfg) {
  if (cfg.mode != Mode::Direct) throw ConfigError("direct_design needs design.mode = direct");
  if (length == 0) throw ConfigError("design length must be positive");
  return run_design([](ad::Graph&, ad::Var z) { return ad::softmax_channels(z); }, {length, 4},
                    obj, cfg);
}

DesignResult joint_design(const models::Generator& gen, const Objective& obj,
                          const DesignConfig& cfg) {
  if (cfg.mode != Mode::Joint) throw ConfigError("joint_design needs design.mode = joint");
  obj.check();
  for (const auto& t : obj.terms)
    if (auto need = t.scorer->length(); need && *need != gen.spec.length)
      throw ConfigError("generator length " + std::to_string(gen.spec.length) + " does not match " +
                        t.scorer->name() + " length " + std::to_string(*need));
  const auto& spec = gen.spec;
  return run_design(
      [&](ad::Graph& g, ad::Var z) {
        const auto params = gen.params.bind(g);
        return models::generator_forward(spec, params, z);
      },
      {spec.latent_dim}, obj, cfg);
}

// ---- reports ------------------------------------------------------------------

DesignReport design_report(const DesignResult& result, const ReportOptions& opt) {
  DesignReport rep;
  rep.term_names = result.term_names;
  rep.has_oracle = opt.oracle != nullptr;
  double sum_t = 0.0, sum_o = 0.0;
  bool first = true;
  for (const auto& r : result.restarts) {
    if (!r.ok) continue;
    ReportRow row;
    row.restart = r.restart;
    row.steps = r.steps;
    row.final_t = r.final_t;
    row.sequence = r.sequence.str();
    row.term_scores = r.term_scores;
    if (opt.oracle) row.oracle = opt.oracle->score(r.sequence);
    if (opt.motif) {
      for (const auto& m : eval::motif_matches(r.sequence, *opt.motif, opt.motif_threshold)) {
        if (!row.motif_hits.empty()) row.motif_hits += ',';
        row.motif_hits += std::to_string(m.position);
      }
    }
    rep.max_t = first ? row.final_t : std::max(rep.max_t, row.final_t);
    sum_t += row.final_t;
    if (row.oracle) {
      rep.max_oracle = first ? *row.oracle : std::max(rep.max_oracle, *row.oracle);
      sum_o += *row.oracle;
    }
    first = false;
    rep.rows.push_back(std::move(row));
  }
  if (!rep.rows.empty()) {
    rep.mean_t = sum_t / static_cast<double>(rep.rows.size());
    rep.mean_oracle = sum_o / static_cast<double>(rep.rows.size());
  }
  return rep;
}

void DesignReport::write_tsv(std::ostream& out) const {
  out << "restart\tsteps\tfinal_t\tsequence";
  for (const auto& n : term_names) out << '\t' << "term_" << n;
  if (has_oracle) out << "\toracle";
  out << "\tmotif_hits\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.restart << '\t' << r.steps << '\t' << r.final_t << '\t' << r.sequence;
    for (double v : r.term_scores) out << '\t' << v;
    if (has_oracle) out << '\t' << (r.oracle ? *r.oracle : 0.0);
    out << '\t' << (r.motif_hits.empty() ? "-" : r.motif_hits) << '\n';
  }
}

void DesignReport::write_summary(std::ostream& out) const {
  out << "field\tvalue\n";
  out.precision(17);
  out << "restarts\t" << rows.size() << '\n';
  out << "max_t\t" << max_t << '\n' << "mean_t\t" << mean_t << '\n';
  if (has_oracle) out << "max_oracle\t" << max_oracle << '\n' << "mean_oracle\t" << mean_oracle << '\n';
}

void write_trajectories(std::ostream& out, const DesignResult& result) {
  out << "restart\tstep\tt\n";
  out.precision(17);
  for (const auto& r : result.restarts)
    for (std::size_t s = 0; s < r.trajectory.size(); ++s)
      out << r.restart << '\t' << s << '\t' << r.trajectory[s] << '\n';
}

std::vector<ParetoPoint> pareto_sweep(std::shared_ptr<const Scorer> a,
                                      std::shared_ptr<const Scorer> b,
                                      const std::vector<std::pair<double, double>>& weights,
                                      std::size_t length, const DesignConfig& cfg) {
  std::vector<ParetoPoint> out;
  for (const auto& [wa, wb] : weights) {
    Objective obj;
    obj.terms.push_back({a, wa, 1});
    obj.terms.push_back({b, wb, 1});
    const auto res = direct_design(obj, length, cfg);
    for (const auto& r : res.restarts) {
      if (!r.ok) continue;
      out.push_back({wa, wb, r.sequence.str(), r.term_scores[0], r.term_scores[1]});
    }
  }
  return out;
}

void write_scatter_tsv(std::ostream& out, const std::string& cohort,
                       const std::vector<ParetoPoint>& points, bool header) {
  if (header) out << "cohort\tweight_a\tweight_b\tsequence\tscore_a\tscore_b\n";
  out.precision(17);
  for (const auto& p : points)
    out << cohort << '\t' << p.weight_a << '\t' << p.weight_b << '\t' << p.sequence << '\t'
        << p.score_a << '\t' << p.score_b << '\n';
}

}  // namespace dnagen::design
