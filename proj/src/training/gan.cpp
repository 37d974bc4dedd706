#include <cmath>
#include <ostream>

#include "dnagen/error.hpp"
#include "dnagen/gradcore/nn.hpp"
#include "dnagen/training/training.hpp"

namespace dnagen::training {

namespace {

std::vector<ad::Tensor> values_of(std::span<const ad::Var> vars) {
  std::vector<ad::Tensor> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.value());
  return out;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw TrainingError(std::string("non-finite ") + what);
}

}  // namespace

PenaltyTerms gradient_penalty(const models::DiscriminatorSpec& spec,
                              std::span<const ad::Var> params, const ad::Tensor& real,
                              const ad::Tensor& fake, std::span<const double> u) {
  if (real.shape() != fake.shape())
    throw DimensionError("gradient_penalty: real " + ad::to_string(real.shape()) + " vs fake " +
                         ad::to_string(fake.shape()));
  if (real.rank() != 3) throw DimensionError("gradient_penalty needs [B, L, C] batches");
  const std::size_t b = real.dim(0);
  if (u.size() != b) throw DimensionError("gradient_penalty needs one mixing weight per sample");
  const std::size_t per = real.size() / b;
  ad::Tensor mixed(real.shape());
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t j = n * per + i;
      mixed[j] = u[n] * real[j] + (1.0 - u[n]) * fake[j];
    }
  ad::Graph& g = params.front().graph();
  ad::Var xhat = g.input(std::move(mixed));
  ad::Var scores = models::discriminator_forward(spec, params, xhat);
  // Samples are scored independently, so the gradient of the sum holds each
  // sample's own input gradient.
  ad::Var gx = g.grad(ad::sum_all(scores), xhat);
  ad::Var norms = ad::sqrt(ad::sum_last(ad::square(ad::reshape(gx, {b, per}))));
  ad::Var penalty = ad::mean_all(ad::square(ad::affine(norms, 1.0, -1.0)));
  return {penalty, norms};
}

DiscStepResult disc_step(models::Discriminator& disc, ad::AdamState& opt,
                         const models::Generator& gen, const ad::Tensor& real,
                         const ad::Tensor& z, std::span<const double> u, double lambda) {
  const ad::Tensor fake = models::generate(gen, z);
  if (fake.shape() != real.shape())
    throw DimensionError("disc_step: real batch " + ad::to_string(real.shape()) +
                         " vs generated " + ad::to_string(fake.shape()));
  ad::Graph g;
  const auto params = disc.params.bind(g);
  ad::Var dr = ad::mean_all(models::discriminator_forward(disc.spec, params, g.input(real)));
  ad::Var df = ad::mean_all(models::discriminator_forward(disc.spec, params, g.input(fake)));
  ad::Var loss = ad::sub(df, dr);
  DiscStepResult r;
  if (lambda > 0.0) {
    const auto pt = gradient_penalty(disc.spec, params, real, fake, u);
    loss = ad::add(loss, ad::scale(pt.penalty, lambda));
    r.penalty = pt.penalty.item();
    double s = 0.0;
    for (double v : pt.norms.value().data()) s += v;
    r.grad_norm = s / static_cast<double>(pt.norms.size());
  }
  r.loss = loss.item();
  r.real_mean = dr.item();
  r.fake_mean = df.item();
  require_finite(r.loss, "discriminator loss");
  const auto grads = g.grad(loss, params, true);
  ad::adam_step(disc.params.tensors(), values_of(grads), opt);
  return r;
}

double gen_step(models::Generator& gen, ad::AdamState& opt, const models::Discriminator& disc,
                const ad::Tensor& z) {
  ad::Graph g;
  const auto gp = gen.params.bind(g);
  const auto dp = disc.params.bind(g);
  ad::Var x = models::generator_forward(gen.spec, gp, g.input(z));
  ad::Var loss = ad::neg(ad::mean_all(models::discriminator_forward(disc.spec, dp, x)));
  const double v = loss.item();
  require_finite(v, "generator loss");
  const auto grads = g.grad(loss, gp, true);
  ad::adam_step(gen.params.tensors(), values_of(grads), opt);
  return v;
}

void GanTrainConfig::check() const {
  if (batch < 2) throw ConfigError("train.batch must be at least 2");
  if (critic_steps < 1) throw ConfigError("train.critic_steps must be at least 1");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be non-negative");
  if (!(adam.step_size >= 0.0)) throw ConfigError("train.lr must be non-negative");
  if (snapshot_every > 0 && snapshot_samples == 0)
    throw ConfigError("train.snapshot_samples must be positive");
}

ad::Tensor sample_latent(std::size_t n, std::size_t latent_dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  ad::Tensor z({n, latent_dim});
  for (auto& v : z.data()) v = nd(rng);
  return z;
}

double one_hotness(const ad::Tensor& x, double threshold) {
  if (x.rank() < 2 || x.dim(x.rank() - 1) < 4)
    throw DimensionError("one_hotness needs [.., L, C >= 4], got " + ad::to_string(x.shape()));
  const std::size_t c = x.dim(x.rank() - 1);
  const std::size_t rows = x.size() / c;
  if (rows == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = x.data().data() + r * c;
    if (std::max({p[0], p[1], p[2], p[3]}) >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows);
}

bool motif_hit(const seq::DnaSequence& s, const models::Pwm& pwm, double fraction) {
  double best = 0.0;
  for (const auto& r : pwm.rows()) best += std::max({r[0], r[1], r[2], r[3]});
  return models::pwm_score(s, pwm) >= fraction * best - 1e-12;
}

double motif_match_rate(std::span<const seq::DnaSequence> seqs, const models::Pwm& pwm,
                        double fraction) {
  if (seqs.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : seqs) hits += motif_hit(s, pwm, fraction) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(seqs.size());
}

GanResult train_wgan(const ad::Tensor& data, const models::GeneratorSpec& gspec,
                     const models::DiscriminatorSpec& dspec, const GanTrainConfig& cfg,
                     const GanProgress& progress) {
  cfg.check();
  if (data.rank() != 3 || data.dim(0) == 0)
    throw DimensionError("train_wgan needs a non-empty [N, L, C] dataset");
  if (data.dim(1) != dspec.length || data.dim(2) != dspec.in_channels)
    throw DimensionError("dataset " + ad::to_string(data.shape()) +
                         " does not match the discriminator input");
  if (gspec.length != dspec.length || gspec.out_channels() != dspec.in_channels)
    throw ConfigError("generator output and discriminator input shapes differ");

  std::mt19937_64 rng(cfg.seed);
  GanResult res{models::init_generator(gspec, rng), models::init_discriminator(dspec, rng), {}};
  auto gopt = ad::make_adam_state(cfg.adam, res.gen.params.tensors());
  auto dopt = ad::make_adam_state(cfg.adam, res.disc.params.tensors());

  // Fixed latent batch for snapshots, drawn from its own stream.
  std::mt19937_64 snap_rng(cfg.seed ^ 0x5eedULL);
  const ad::Tensor snap_z =
      cfg.snapshot_every ? sample_latent(cfg.snapshot_samples, gspec.latent_dim, snap_rng)
                         : ad::Tensor();

  const std::size_t n = data.dim(0);
  const std::size_t per = data.size() / n;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ad::Tensor real({cfg.batch, data.dim(1), data.dim(2)});
  std::vector<double> u(cfg.batch);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    GanStepMetrics m;
    m.step = step;
    for (std::size_t c = 0; c < cfg.critic_steps; ++c) {
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        const std::size_t i = pick(rng);
        std::copy_n(data.data().begin() + static_cast<std::ptrdiff_t>(i * per), per,
                    real.data().begin() + static_cast<std::ptrdiff_t>(b * per));
      }
      const ad::Tensor z = sample_latent(cfg.batch, gspec.latent_dim, rng);
      for (auto& v : u) v = unif(rng);
      DiscStepResult r;
      try {
        r = disc_step(res.disc, dopt, res.gen, real, z, u, cfg.lambda);
      } catch (const NumericError& e) {
        throw TrainingError("discriminator step failed at generator step " +
                            std::to_string(step) + ": " + e.what());
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at generator step " + std::to_string(step));
      }
      m.d_loss = r.loss;
      m.penalty = r.penalty;
      m.grad_norm = r.grad_norm;
    }
    const ad::Tensor z = sample_latent(cfg.batch, gspec.latent_dim, rng);
    try {
      m.g_loss = gen_step(res.gen, gopt, res.disc, z);
    } catch (const NumericError& e) {
      throw TrainingError("generator step failed at generator step " + std::to_string(step) +
                          ": " + e.what());
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " at generator step " + std::to_string(step));
    }
    for (const auto& t : res.gen.params.tensors())
      if (!t.all_finite())
        throw TrainingError("generator parameters became non-finite at step " +
                            std::to_string(step));
    if (cfg.snapshot_every && step % cfg.snapshot_every == 0) {
      const ad::Tensor x = models::generate(res.gen, snap_z);
      m.one_hotness = one_hotness(x);
      if (cfg.motif) {
        const auto seqs = seq::decode_batch(x);
        m.motif_rate = motif_match_rate(seqs, *cfg.motif, cfg.motif_fraction);
      }
    }
    if (progress) progress(m);
    res.metrics.push_back(m);
  }
  return res;
}

void write_gan_metrics(std::ostream& out, std::span<const GanStepMetrics> metrics) {
  out << "step\td_loss\tg_loss\tpenalty\tgrad_norm\tone_hotness\tmotif_rate\n";
  out.precision(17);
  for (const auto& m : metrics) {
    out << m.step << '\t' << m.d_loss << '\t' << m.g_loss << '\t' << m.penalty << '\t'
        << m.grad_norm << '\t';
    if (m.one_hotness) out << *m.one_hotness; else out << "NA";
    out << '\t';
    if (m.motif_rate) out << *m.motif_rate; else out << "NA";
    out << '\n';
  }
}

}  // namespace dnagen::training
