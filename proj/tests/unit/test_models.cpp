#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "dnagen/error.hpp"
#include "dnagen/models/checkpoint.hpp"
#include "dnagen/models/networks.hpp"
#include "dnagen/models/pwm.hpp"
#include "dnagen/seqdata/sequence.hpp"
#include "oracles.hpp"

using namespace dnagen;
using namespace dnagen::models;
using dnagen::ad::Graph;
using dnagen::ad::Tensor;
using dnagen::ad::Var;

namespace {

constexpr double kFdTol = 1e-4;

GeneratorSpec small_gen(bool annotation = false) {
  GeneratorSpec s;
  s.latent_dim = 5;
  s.length = 7;
  s.channels = 3;
  s.resblocks = 2;
  s.filter_length = 3;
  s.annotation = annotation;
  return s;
}

DiscriminatorSpec small_disc() {
  DiscriminatorSpec s;
  s.length = 7;
  s.channels = 3;
  s.resblocks = 2;
  s.filter_length = 3;
  return s;
}

PredictorSpec small_pred() {
  PredictorSpec s;
  s.length = 9;
  s.filters = 3;
  s.filter_length = 4;
  s.hidden = 4;
  return s;
}

// Biases start at zero; give them values so their gradients are exercised.
void jitter(ParamSet& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& t : p.tensors())
    for (auto& v : t.data()) v += u(rng);
}

std::size_t index_of(const ParamSet& p, const std::string& name) {
  const auto& n = p.names();
  return static_cast<std::size_t>(std::find(n.begin(), n.end(), name) - n.begin());
}

// Worst FD error of a model's scalarized output w.r.t. its input and all parameters.
template <typename Spec, typename Fwd>
double model_gradient_error(const Spec& spec, Fwd fwd, const ParamSet& params, const Tensor& x,
                            std::uint64_t seed) {
  std::vector<Tensor> inputs{x};
  for (const auto& t : params.tensors()) inputs.push_back(t);
  oracle::GraphFn f = [&](Graph& g, const std::vector<Var>& v) {
    std::vector<Var> ps(v.begin() + 1, v.end());
    Var y = fwd(spec, ps, v[0]);
    std::mt19937_64 proj(seed);
    return ad::sum_all(ad::mul(y, g.input(oracle::random_tensor(y.shape(), proj))));
  };
  return oracle::gradient_check(f, inputs);
}

std::string random_dna(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 3);
  std::string s(n, 'A');
  for (auto& c : s) c = seq::kBases[static_cast<std::size_t>(d(rng))];
  return s;
}

}  // namespace

TEST(Generator, RowsSumToOneAndDeterministic) {
  std::mt19937_64 rng(1);
  const auto gen = init_generator(small_gen(), rng);
  const Tensor z = oracle::random_tensor({6, 5}, rng, -2, 2);
  const Tensor x = generate(gen, z);
  ASSERT_EQ(x.shape(), (ad::Shape{6, 7, 4}));
  for (std::size_t r = 0; r < 6 * 7; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) s += x[r * 4 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_EQ(generate(gen, z), x);
}

TEST(Generator, BatchedRowsMatchSingleCalls) {
  std::mt19937_64 rng(2);
  const auto gen = init_generator(small_gen(), rng);
  const Tensor z = oracle::random_tensor({3, 5}, rng);
  const Tensor x = generate(gen, z);
  for (std::size_t b = 0; b < 3; ++b) {
    Tensor zb({5});
    for (std::size_t k = 0; k < 5; ++k) zb[k] = z.at(b, k);
    const Tensor xb = generate(gen, zb);
    for (std::size_t i = 0; i < xb.size(); ++i) EXPECT_EQ(xb[i], x[b * xb.size() + i]);
  }
}

TEST(Generator, AnnotationChannelIsSigmoid) {
  std::mt19937_64 rng(3);
  const auto gen = init_generator(small_gen(true), rng);
  const Tensor x = generate(gen, oracle::random_tensor({5}, rng));
  ASSERT_EQ(x.shape(), (ad::Shape{7, 5}));
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_NEAR(x.at(i, 0) + x.at(i, 1) + x.at(i, 2) + x.at(i, 3), 1.0, 1e-12);
    EXPECT_GT(x.at(i, 4), 0.0);
    EXPECT_LT(x.at(i, 4), 1.0);
  }
}

TEST(Generator, RejectsWrongLatentDimension) {
  std::mt19937_64 rng(4);
  const auto gen = init_generator(small_gen(), rng);
  EXPECT_THROW(generate(gen, Tensor({4})), DimensionError);
}

TEST(Generator, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int point = 0; point < 3; ++point) {
    auto gen = init_generator(small_gen(point == 2), rng);
    jitter(gen.params, rng);
    const Tensor z = oracle::random_tensor({2, 5}, rng);
    EXPECT_LT(model_gradient_error(gen.spec, generator_forward, gen.params, z, 40 + point), kFdTol);
  }
}

TEST(Discriminator, ZeroFinalLinearScoresZero) {
  std::mt19937_64 rng(6);
  auto d = init_discriminator(small_disc(), rng);
  auto& w = d.params.tensors()[index_of(d.params, "out.w")];
  w = Tensor(w.shape());
  Graph g;
  const Var y = discriminator_forward(d.spec, d.params.bind(g), g.input(oracle::random_tensor({4, 7, 4}, rng)));
  EXPECT_EQ(y.value(), Tensor({4}));
}

TEST(Discriminator, NonDegenerateAndGradientChecked) {
  std::mt19937_64 rng(7);
  auto d = init_discriminator(small_disc(), rng);
  jitter(d.params, rng);
  Graph g;
  const auto ps = d.params.bind(g);
  const double a = discriminator_forward(d.spec, ps, g.input(oracle::random_tensor({7, 4}, rng))).item();
  const double b = discriminator_forward(d.spec, ps, g.input(oracle::random_tensor({7, 4}, rng))).item();
  EXPECT_NE(a, b);
  for (int point = 0; point < 3; ++point) {
    const Tensor x = oracle::random_tensor({2, 7, 4}, rng);
    EXPECT_LT(model_gradient_error(d.spec, discriminator_forward, d.params, x, 50 + point), kFdTol);
  }
}

TEST(Predictor, ZeroFinalLinearGivesHalf) {
  std::mt19937_64 rng(8);
  auto p = init_predictor(small_pred(), rng);
  auto& w = p.params.tensors()[index_of(p.params, "fc2.w")];
  w = Tensor(w.shape());
  const Tensor y = predict(p, oracle::random_tensor({3, 9, 4}, rng));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y[i], 0.5);
}

TEST(Predictor, MotifShiftedIntoFlankStillScores) {
  std::mt19937_64 rng(9);
  auto p = init_predictor(small_pred(), rng);
  jitter(p.params, rng);
  const std::string motif = "GATTACA";
  for (std::size_t pos = 0; pos < 9; ++pos) {
    std::string s(9, 'C');
    for (std::size_t j = 0; j < motif.size() && pos + j < 9; ++j) s[pos + j] = motif[j];
    double y = 0;
    ASSERT_NO_THROW(y = predict(p, seq::encode_onehot(seq::DnaSequence(s))).item());
    EXPECT_TRUE(std::isfinite(y));
  }
  EXPECT_THROW(predict(p, Tensor({8, 4})), DimensionError);
}

TEST(Predictor, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  auto p = init_predictor(small_pred(), rng);
  jitter(p.params, rng);
  for (int point = 0; point < 3; ++point) {
    const Tensor x = oracle::random_tensor({2, 9, 4}, rng);
    EXPECT_LT(model_gradient_error(p.spec, predictor_forward, p.params, x, 60 + point), kFdTol);
  }
}

TEST(Pwm, ScoreExamples) {
  const auto taat = Pwm::delta(seq::DnaSequence("TAAT"));
  EXPECT_EQ(pwm_score(seq::DnaSequence("GGTAATGG"), taat), 4.0);
  EXPECT_EQ(pwm_score(seq::DnaSequence("GGGGGGGG"), taat), 0.0);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10; ++i)
    EXPECT_NEAR(pwm_score(seq::DnaSequence(random_dna(12, rng)), Pwm::uniform(5)), 0.25 * 5, 1e-15);
  EXPECT_THROW(pwm_score(seq::DnaSequence("TAA"), taat), DimensionError);
  EXPECT_THROW(Pwm({{0.5, 0.5, 0.5, 0.0}}), ConfigError);
}

TEST(Pwm, RelaxedScoreMatchesWindowOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pwm = Pwm::random(4, 0.7, rng);
    const Tensor x = oracle::random_tensor({10, 4}, rng, 0, 1);
    std::vector<std::array<double, 4>> xr(10), pr(pwm.rows().begin(), pwm.rows().end());
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t c = 0; c < 4; ++c) xr[i][c] = x.at(i, c);
    Graph g;
    EXPECT_NEAR(pwm_score(g.input(x), pwm).item(), oracle::pwm_score(xr, pr), 1e-12);
  }
}

TEST(Pwm, TsvRoundTrip) {
  std::mt19937_64 rng(13);
  const auto pwm = Pwm::random(6, 0.85, rng);
  std::stringstream buf;
  pwm.write_tsv(buf);
  EXPECT_EQ(Pwm::read_tsv(buf).rows(), pwm.rows());
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("dnagen_ck_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, GanRoundTripIsBitIdentical) {
  std::mt19937_64 rng(14);
  auto gen = init_generator(small_gen(), rng);
  auto disc = init_discriminator(small_disc(), rng);
  jitter(gen.params, rng);
  save_gan(gen, disc, dir_ / "gan.ck");
  const auto back = load_gan(dir_ / "gan.ck");
  EXPECT_EQ(back.gen.spec, gen.spec);
  EXPECT_EQ(back.disc.spec, disc.spec);
  EXPECT_EQ(back.gen.params, gen.params);
  EXPECT_EQ(back.disc.params, disc.params);
  const Tensor z = oracle::random_tensor({4, 5}, rng);
  EXPECT_EQ(generate(back.gen, z), generate(gen, z));
  EXPECT_THROW(load_predictor(dir_ / "gan.ck"), CheckpointError);
}

TEST_F(CheckpointTest, PredictorRoundTrip) {
  std::mt19937_64 rng(15);
  auto p = init_predictor(small_pred(), rng);
  jitter(p.params, rng);
  save_predictor(p, dir_ / "p.ck");
  const auto back = load_predictor(dir_ / "p.ck");
  EXPECT_EQ(back.spec, p.spec);
  EXPECT_EQ(back.params, p.params);
  EXPECT_EQ(file_hash(dir_ / "p.ck"), file_hash(dir_ / "p.ck"));
}

TEST_F(CheckpointTest, TamperedDescriptorAndTruncationRejected) {
  std::mt19937_64 rng(16);
  save_predictor(init_predictor(small_pred(), rng), dir_ / "p.ck");
  std::string bytes;
  {
    std::ifstream in(dir_ / "p.ck", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto at = bytes.find("\"filters\":3");
  ASSERT_NE(at, std::string::npos);
  std::string tampered = bytes;
  tampered[at + 10] = '4';
  std::ofstream(dir_ / "t.ck", std::ios::binary) << tampered;
  EXPECT_THROW(load_predictor(dir_ / "t.ck"), CheckpointError);
  std::ofstream(dir_ / "short.ck", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  EXPECT_THROW(load_predictor(dir_ / "short.ck"), CheckpointError);
  std::ofstream(dir_ / "long.ck", std::ios::binary) << bytes << 'x';
  EXPECT_THROW(load_predictor(dir_ / "long.ck"), CheckpointError);
  EXPECT_THROW(load_predictor(dir_ / "missing.ck"), IoError);
}
