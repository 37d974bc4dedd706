#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dnagen/error.hpp"
#include "dnagen/gradcore/nn.hpp"
#include "dnagen/training/training.hpp"

namespace dnagen::training {

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("mse: length mismatch");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: length mismatch");
  if (a.size() < 2) throw DimensionError("spearman needs at least two items");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  // A constant input has no defined correlation; report 0.
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> predict_scores(const models::Predictor& p,
                                   std::span<const seq::DnaSequence> seqs) {
  std::vector<double> out;
  out.reserve(seqs.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t i = 0; i < seqs.size(); i += kChunk) {
    const auto part = seqs.subspan(i, std::min(kChunk, seqs.size() - i));
    const auto y = models::predict(p, seq::encode_batch(part));
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

void PredictorTrainConfig::check() const {
  if (batch < 1) throw ConfigError("train.batch must be positive");
  if (!(adam.step_size >= 0.0)) throw ConfigError("train.lr must be non-negative");
}

PredictorResult train_predictor(const seq::ScoredDataset& data, const models::PredictorSpec& spec,
                                const PredictorTrainConfig& cfg) {
  cfg.check();
  data.check();
  const auto train = data.subset(seq::Split::Train);
  if (train.size() == 0) throw ConfigError("predictor training needs a non-empty train split");
  auto valid = data.subset(seq::Split::Valid);
  if (valid.size() < 2) valid = train;

  std::mt19937_64 rng(cfg.seed);
  PredictorResult res{models::init_predictor(spec, rng), {}};
  auto opt = ad::make_adam_state(cfg.adam, res.predictor.params.tensors());
  const ad::Tensor x_all = seq::encode_batch(train.sequences);
  const std::size_t per = spec.length * 4;
  if (x_all.dim(1) != spec.length)
    throw DimensionError("dataset length " + std::to_string(x_all.dim(1)) +
                         " does not match predictor length " + std::to_string(spec.length));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t b = std::min(cfg.batch, order.size() - start);
      ad::Tensor xb({b, spec.length, 4});
      ad::Tensor yb({b});
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t i = order[start + k];
        std::copy_n(x_all.data().begin() + static_cast<std::ptrdiff_t>(i * per), per,
                    xb.data().begin() + static_cast<std::ptrdiff_t>(k * per));
        yb[k] = train.scores[i];
      }
      ad::Graph g;
      const auto params = res.predictor.params.bind(g);
      ad::Var pred = models::predictor_forward(spec, params, g.input(std::move(xb)));
      ad::Var loss = ad::mean_all(ad::square(ad::sub(pred, g.input(std::move(yb)))));
      const double v = loss.item();
      if (!std::isfinite(v))
        throw TrainingError("non-finite predictor loss in epoch " + std::to_string(epoch));
      loss_sum += v * static_cast<double>(b);
      const auto grads = g.grad(loss, params, true);
      std::vector<ad::Tensor> gv;
      gv.reserve(grads.size());
      for (const auto& gr : grads) gv.push_back(gr.value());
      ad::adam_step(res.predictor.params.tensors(), gv, opt);
    }
    PredictorEpochMetrics m;
    m.epoch = epoch;
    m.train_mse = loss_sum / static_cast<double>(order.size());
    const auto yv = predict_scores(res.predictor, valid.sequences);
    m.valid_mse = mse(yv, valid.scores);
    m.valid_spearman = spearman(yv, valid.scores);
    res.metrics.push_back(m);
  }
  return res;
}

void write_predictor_metrics(std::ostream& out, std::span<const PredictorEpochMetrics> metrics) {
  out << "epoch\ttrain_mse\tvalid_mse\tvalid_spearman\n";
  out.precision(17);
  for (const auto& m : metrics)
    out << m.epoch << '\t' << m.train_mse << '\t' << m.valid_mse << '\t' << m.valid_spearman
        << '\n';
}

}  // namespace dnagen::training
