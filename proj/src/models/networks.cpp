#include "dnagen/models/networks.hpp"

#include <cmath>
#include <cstring>

#include "dnagen/error.hpp"
#include "dnagen/gradcore/nn.hpp"

namespace dnagen::models {

void ParamSet::add(std::string name, ad::Tensor value) {
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

const ad::Tensor& ParamSet::at(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return tensors_[i];
  throw Error("no parameter named " + std::string(name));
}

std::uint64_t ParamSet::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (std::size_t i = 0; i < names_.size(); ++i) {
    mix(names_[i].data(), names_[i].size());
    for (auto d : tensors_[i].shape()) {
      const std::uint64_t d64 = d;
      mix(&d64, sizeof d64);
    }
    mix(tensors_[i].data().data(), tensors_[i].size() * sizeof(double));
  }
  return h;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<ad::Var> ParamSet::bind(ad::Graph& g) const {
  std::vector<ad::Var> vars;
  vars.reserve(tensors_.size());
  for (const auto& t : tensors_) vars.push_back(g.input(t));
  return vars;
}

namespace {

ad::Tensor glorot(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  ad::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

ad::Tensor conv_weight(std::size_t k, std::size_t cin, std::size_t cout, std::mt19937_64& rng) {
  return glorot({k, cin, cout}, k * cin, k * cout, rng);
}

void add_resblocks(ParamSet& p, std::size_t n, std::size_t k, std::size_t c, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::string prefix = "res" + std::to_string(i) + ".";
    p.add(prefix + "w1", conv_weight(k, c, c, rng));
    p.add(prefix + "b1", ad::Tensor({c}));
    p.add(prefix + "w2", conv_weight(k, c, c, rng));
    p.add(prefix + "b2", ad::Tensor({c}));
  }
}

// Walks a parameter list in construction order.
class Cursor {
 public:
  Cursor(std::span<const ad::Var> params, std::size_t expected, const char* model)
      : params_(params) {
    if (params.size() != expected)
      throw DimensionError(std::string(model) + ": expected " + std::to_string(expected) +
                           " parameter tensors, got " + std::to_string(params.size()));
  }
  ad::Var next() { return params_[pos_++]; }

 private:
  std::span<const ad::Var> params_;
  std::size_t pos_ = 0;
};

ad::Var run_resblocks(ad::Var h, Cursor& cur, std::size_t n, double r) {
  for (std::size_t i = 0; i < n; ++i) {
    ad::ResBlockParams rp;
    rp.filters1 = cur.next();
    rp.bias1 = cur.next();
    rp.filters2 = cur.next();
    rp.bias2 = cur.next();
    h = ad::resblock(h, rp, r);
  }
  return h;
}

void check_sequence_input(const ad::Shape& s, std::size_t length, std::size_t channels,
                          const char* model) {
  const bool ok = (s.size() == 2 && s[0] == length && s[1] == channels) ||
                  (s.size() == 3 && s[1] == length && s[2] == channels);
  if (!ok)
    throw DimensionError(std::string(model) + ": expected [" + std::to_string(length) + ", " +
                         std::to_string(channels) + "] inputs, got " + ad::to_string(s));
}

}  // namespace

Generator init_generator(const GeneratorSpec& spec, std::mt19937_64& rng) {
  Generator g{spec, {}};
  const std::size_t lc = spec.length * spec.channels;
  g.params.add("in.w", glorot({spec.latent_dim, lc}, spec.latent_dim, lc, rng));
  g.params.add("in.b", ad::Tensor({lc}));
  add_resblocks(g.params, spec.resblocks, spec.filter_length, spec.channels, rng);
  g.params.add("out.w", conv_weight(1, spec.channels, spec.out_channels(), rng));
  g.params.add("out.b", ad::Tensor({spec.out_channels()}));
  return g;
}

Discriminator init_discriminator(const DiscriminatorSpec& spec, std::mt19937_64& rng) {
  Discriminator d{spec, {}};
  d.params.add("in.w", conv_weight(spec.filter_length, spec.in_channels, spec.channels, rng));
  d.params.add("in.b", ad::Tensor({spec.channels}));
  add_resblocks(d.params, spec.resblocks, spec.filter_length, spec.channels, rng);
  const std::size_t lc = spec.length * spec.channels;
  d.params.add("out.w", glorot({lc, 1}, lc, 1, rng));
  d.params.add("out.b", ad::Tensor({1}));
  return d;
}

Predictor init_predictor(const PredictorSpec& spec, std::mt19937_64& rng) {
  Predictor p{spec, {}};
  p.params.add("conv.w", conv_weight(spec.filter_length, 4, spec.filters, rng));
  p.params.add("conv.b", ad::Tensor({spec.filters}));
  p.params.add("fc1.w", glorot({2 * spec.filters, spec.hidden}, 2 * spec.filters, spec.hidden, rng));
  p.params.add("fc1.b", ad::Tensor({spec.hidden}));
  p.params.add("fc2.w", glorot({spec.hidden, 1}, spec.hidden, 1, rng));
  p.params.add("fc2.b", ad::Tensor({1}));
  return p;
}

ad::Var generator_forward(const GeneratorSpec& spec, std::span<const ad::Var> params, ad::Var z) {
  Cursor cur(params, 4 + 4 * spec.resblocks, "generator");
  const auto& zs = z.shape();
  const bool batched = zs.size() == 2;
  if (!((zs.size() == 1 && zs[0] == spec.latent_dim) || (batched && zs[1] == spec.latent_dim)))
    throw DimensionError("generator: latent code " + ad::to_string(zs) + " does not match D_z=" +
                         std::to_string(spec.latent_dim));
  const std::size_t b = batched ? zs[0] : 1;
  ad::Var w = cur.next();
  ad::Var bias = cur.next();
  ad::Var h = ad::linear(batched ? z : ad::reshape(z, {1, spec.latent_dim}), w, bias);
  h = ad::reshape(h, {b, spec.length, spec.channels});
  h = run_resblocks(h, cur, spec.resblocks, spec.residual_scale);
  ad::Var ow = cur.next();
  ad::Var ob = cur.next();
  ad::Var logits = ad::conv1d(h, ow, ob);
  ad::Var out;
  if (spec.annotation) {
    out = ad::concat_last(ad::softmax_channels(ad::slice_last(logits, 0, 4)),
                          ad::sigmoid(ad::slice_last(logits, 4, 5)));
  } else {
    out = ad::softmax_channels(logits);
  }
  if (!batched) out = ad::reshape(out, {spec.length, spec.out_channels()});
  return out;
}

ad::Var discriminator_forward(const DiscriminatorSpec& spec, std::span<const ad::Var> params,
                              ad::Var x) {
  Cursor cur(params, 4 + 4 * spec.resblocks, "discriminator");
  check_sequence_input(x.shape(), spec.length, spec.in_channels, "discriminator");
  const bool batched = x.shape().size() == 3;
  const std::size_t b = batched ? x.shape()[0] : 1;
  ad::Var iw = cur.next();
  ad::Var ib = cur.next();
  ad::Var h = ad::conv1d(batched ? x : ad::reshape(x, {1, spec.length, spec.in_channels}), iw, ib,
                         ad::PadSpec::same(spec.filter_length));
  h = run_resblocks(h, cur, spec.resblocks, spec.residual_scale);
  ad::Var ow = cur.next();
  ad::Var ob = cur.next();
  ad::Var score = ad::linear(ad::reshape(h, {b, spec.length * spec.channels}), ow, ob);
  return batched ? ad::reshape(score, {b}) : ad::reshape(score, {});
}

ad::Var predictor_forward(const PredictorSpec& spec, std::span<const ad::Var> params, ad::Var x) {
  Cursor cur(params, 6, "predictor");
  check_sequence_input(x.shape(), spec.length, 4, "predictor");
  const bool batched = x.shape().size() == 3;
  const std::size_t b = batched ? x.shape()[0] : 1;
  ad::Var cw = cur.next();
  ad::Var cb = cur.next();
  ad::Var h = ad::conv1d(batched ? x : ad::reshape(x, {1, spec.length, 4}), cw, cb,
                         ad::PadSpec::flank(spec.filter_length - 1, spec.pad_value));
  h = ad::leaky_relu(h, spec.leak);
  h = ad::pool_concat(h);  // [B, 2F]
  ad::Var w1 = cur.next();
  ad::Var b1 = cur.next();
  h = ad::leaky_relu(ad::linear(h, w1, b1), spec.leak);
  ad::Var w2 = cur.next();
  ad::Var b2 = cur.next();
  ad::Var y = ad::sigmoid(ad::linear(h, w2, b2));
  return batched ? ad::reshape(y, {b}) : ad::reshape(y, {});
}

ad::Tensor generate(const Generator& gen, const ad::Tensor& z) {
  ad::Graph g;
  const auto p = gen.params.bind(g);
  return generator_forward(gen.spec, p, g.input(z)).value();
}

ad::Tensor predict(const Predictor& pred, const ad::Tensor& x) {
  ad::Graph g;
  const auto p = pred.params.bind(g);
  return predictor_forward(pred.spec, p, g.input(x)).value();
}

}  // namespace dnagen::models
