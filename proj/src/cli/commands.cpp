#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dnagen/cli/cli.hpp"
#include "dnagen/designer/designer.hpp"
#include "dnagen/error.hpp"
#include "dnagen/evalkit/evalkit.hpp"
#include "dnagen/models/checkpoint.hpp"
#include "dnagen/training/training.hpp"

namespace dnagen::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> percentile;
};

struct Run {
  Config& cfg;
  std::ostream& out;
  fs::path dir;
  std::uint64_t seed = 1;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  auto f = open_output(path);
  f << text;
}

std::string hex16(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

fs::path make_run_dir(const Flags& flags, const Config& cfg, const std::string& command) {
  fs::path dir = flags.out;
  if (dir.empty()) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const std::string key = command + '\n' + cfg.source_text() + '\n' +
                            (flags.seed ? std::to_string(*flags.seed) : std::string("-"));
    dir = fs::path("runs") / (std::string(stamp) + "-" + hex16(derive_seed(0, key)).substr(0, 8));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  return dir;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

models::Pwm motif_from(Config& c, const std::string& section) {
  if (auto file = c.maybe(section, "motif_file")) {
    require_file(*file, "motif file");
    return models::Pwm::load_tsv(*file);
  }
  return models::Pwm::delta(seq::DnaSequence(c.require(section, "motif")));
}

bool has_ext(const fs::path& p, std::initializer_list<const char*> exts) {
  const auto e = p.extension().string();
  return std::any_of(exts.begin(), exts.end(), [&](const char* x) { return e == x; });
}

// Sequences from a TSV dataset, FASTA file or plain list (one per line).
std::vector<seq::DnaSequence> load_sequences(const fs::path& path, std::size_t window,
                                             std::ostream& log) {
  require_file(path, "sequence file");
  if (has_ext(path, {".tsv"})) return seq::ScoredDataset::load_tsv(path).sequences;
  if (has_ext(path, {".fa", ".fasta", ".fna"})) {
    std::vector<std::string> warnings;
    auto seqs = seq::ingest_fasta(path, window, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    return seqs;
  }
  std::ifstream in(path);
  std::vector<seq::DnaSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

void write_sequences(const fs::path& path, std::span<const seq::DnaSequence> seqs) {
  auto f = open_output(path);
  for (const auto& s : seqs) f << s.str() << '\n';
}

// ---- oracles and scored data ---------------------------------------------------

seq::SyntheticOracle make_oracle(Run& r, std::size_t length) {
  Config& c = r.cfg;
  const std::uint64_t seed = derive_seed(r.seed, "oracle");
  if (auto base = c.maybe("data", "oracle_related")) {
    require_file(*base, "oracle");
    return seq::SyntheticOracle::related(seq::SyntheticOracle::load(*base),
                                         c.count("data", "oracle_shared", 1), length, seed);
  }
  return seq::SyntheticOracle::random(c.count("data", "oracle_motifs", 3),
                                      c.count("data", "oracle_motif_length", 8), length, seed);
}

// Scored data for predictor training, and the sequences a GAN should learn from.
seq::ScoredDataset scored_data(Run& r) {
  Config& c = r.cfg;
  const std::string source = c.require("data", "source");
  seq::ScoredDataset data;
  if (source == "tsv") {
    const fs::path path = c.require("data", "path");
    require_file(path, "dataset");
    data = seq::ScoredDataset::load_tsv(path);
  } else if (source == "oracle") {
    const std::size_t length = c.count("data", "length", 36);
    seq::SyntheticOracle oracle;
    if (auto path = c.maybe("data", "oracle")) {
      require_file(*path, "oracle");
      oracle = seq::SyntheticOracle::load(*path);
    } else {
      oracle = make_oracle(r, length);
    }
    oracle.save(r.dir / "oracle.json");
    data = seq::synth_binding_data(oracle, c.count("data", "count", 10000), length,
                                   derive_seed(r.seed, "data"));
  } else {
    throw ConfigError("[data] source '" + source + "' has no scores; use tsv or oracle");
  }
  if (c.has("data", "percentile")) {
    const double pct = c.real("data", "percentile", 100.0);
    const std::size_t before = data.size();
    data = seq::percentile_filter(data, pct);
    r.out << "percentile filter " << pct << ": kept " << data.size() << " of " << before << '\n';
  }
  data.save_tsv(r.dir / "data.tsv");
  return data;
}

seq::ExonDatasetSpec exon_spec(Run& r) {
  Config& c = r.cfg;
  seq::ExonDatasetSpec spec;
  spec.count = c.count("data", "count", 4000);
  spec.length = c.count("data", "length", 40);
  spec.min_exon = c.count("data", "min_exon", 10);
  spec.max_exon = c.count("data", "max_exon", 20);
  if (auto m = c.maybe("data", "start_motif")) spec.start_motif = models::Pwm::delta(seq::DnaSequence(*m));
  spec.start_anchor = c.count("data", "start_anchor", 0);
  spec.seed = derive_seed(r.seed, "data");
  return spec;
}

struct GanData {
  ad::Tensor x;
  std::vector<seq::DnaSequence> sequences;
  std::size_t length = 0;
  bool annotation = false;
  std::optional<models::Pwm> motif;
};

GanData gan_data(Run& r) {
  Config& c = r.cfg;
  const std::string source = c.require("data", "source");
  GanData g;
  if (source == "motif") {
    seq::MotifDatasetSpec spec;
    spec.count = c.count("data", "count", 10000);
    spec.length = c.count("data", "length", 20);
    spec.pwm = motif_from(c, "data");
    spec.planting_prob = c.real("data", "planting_prob", 1.0);
    spec.seed = derive_seed(r.seed, "data");
    g.sequences = seq::synth_motif_dataset(spec).sequences;
    g.motif = spec.pwm;
    g.x = seq::encode_batch(g.sequences);
  } else if (source == "exon") {
    const auto data = seq::synth_exon_dataset(exon_spec(r));
    g.sequences = data.sequences;
    g.x = seq::encode_annotated(data);
    g.annotation = true;
  } else if (source == "fasta") {
    const fs::path path = c.require("data", "path");
    require_file(path, "dataset");
    std::vector<std::string> warnings;
    g.sequences = seq::ingest_fasta(path, c.count("data", "window", 50), &warnings);
    for (const auto& w : warnings) r.out << "warning: " << w << '\n';
    g.x = seq::encode_batch(g.sequences);
  } else if (source == "tsv" || source == "oracle") {
    g.sequences = scored_data(r).sequences_in(seq::Split::Train);
    g.x = seq::encode_batch(g.sequences);
  } else {
    throw ConfigError("[data] source must be one of motif, exon, fasta, tsv, oracle; got '" + source + "'");
  }
  if (g.sequences.empty()) throw ConfigError("the configured dataset is empty");
  g.length = g.sequences.front().size();
  if (c.has("data", "motif") || c.has("data", "motif_file")) g.motif = motif_from(c, "data");
  return g;
}

ad::AdamConfig adam_from(Config& c, const std::string& section, const ad::AdamConfig& d) {
  ad::AdamConfig a = d;
  a.step_size = c.real(section, section == "train" ? "lr" : "step_size", d.step_size);
  a.beta1 = c.real(section, "beta1", d.beta1);
  a.beta2 = c.real(section, "beta2", d.beta2);
  return a;
}

// ---- commands -------------------------------------------------------------------

void cmd_train_gan(Run& r) {
  Config& c = r.cfg;
  const GanData data = gan_data(r);
  models::GeneratorSpec gs;
  gs.length = data.length;
  gs.latent_dim = c.count("model", "latent_dim", 100);
  gs.channels = c.count("model", "channels", 64);
  gs.resblocks = c.count("model", "resblocks", 5);
  gs.filter_length = c.count("model", "filter_length", 5);
  gs.residual_scale = c.real("model", "residual_scale", 0.3);
  gs.annotation = data.annotation;
  models::DiscriminatorSpec ds;
  ds.length = data.length;
  ds.in_channels = gs.out_channels();
  ds.channels = gs.channels;
  ds.resblocks = gs.resblocks;
  ds.filter_length = gs.filter_length;
  ds.residual_scale = gs.residual_scale;

  training::GanTrainConfig tc;
  tc.batch = c.count("train", "batch", 64);
  tc.steps = c.count("train", "steps", 1000);
  tc.critic_steps = c.count("train", "critic_steps", 5);
  tc.lambda = c.real("train", "lambda", 10.0);
  tc.adam = adam_from(c, "train", tc.adam);
  tc.seed = derive_seed(r.seed, "train");
  tc.snapshot_every = c.count("train", "snapshot_every", 100);
  tc.snapshot_samples = c.count("train", "snapshot_samples", 256);
  tc.motif = data.motif;
  const std::size_t every = std::max<std::size_t>(1, c.count("train", "progress_every", 100));

  write_sequences(r.dir / "train.txt", data.sequences);
  r.out << "training WGAN on " << data.sequences.size() << " sequences of length " << data.length
        << " for " << tc.steps << " steps\n";
  const auto result = training::train_wgan(data.x, gs, ds, tc, [&](const training::GanStepMetrics& m) {
    if (m.step % every != 0 && m.step != tc.steps) return;
    r.out << "step " << m.step << "  d_loss " << m.d_loss << "  g_loss " << m.g_loss;
    if (m.one_hotness) r.out << "  one_hotness " << *m.one_hotness;
    if (m.motif_rate) r.out << "  motif_rate " << *m.motif_rate;
    r.out << '\n';
  });
  models::save_gan(result.gen, result.disc, r.dir / "gan.ck");
  auto f = open_output(r.dir / "metrics.tsv");
  training::write_gan_metrics(f, result.metrics);
  r.out << "checkpoint " << (r.dir / "gan.ck").string() << " (" << models::file_hash(r.dir / "gan.ck") << ")\n";
}

void cmd_train_predictor(Run& r) {
  Config& c = r.cfg;
  const auto data = scored_data(r);
  if (data.size() == 0) throw ConfigError("the configured dataset is empty");
  models::PredictorSpec ps;
  ps.length = data.sequences.front().size();
  ps.filters = c.count("model", "pred_filters", 16);
  ps.filter_length = c.count("model", "pred_filter_length", 12);
  ps.hidden = c.count("model", "pred_hidden", 32);
  ps.leak = c.real("model", "pred_leak", 0.1);
  training::PredictorTrainConfig tc;
  tc.batch = c.count("train", "batch", 32);
  tc.epochs = c.count("train", "epochs", 20);
  tc.adam = adam_from(c, "train", tc.adam);
  tc.seed = derive_seed(r.seed, "train");
  r.out << "training predictor on " << data.subset(seq::Split::Train).size() << " sequences\n";
  const auto result = training::train_predictor(data, ps, tc);
  for (const auto& m : result.metrics)
    r.out << "epoch " << m.epoch << "  train_mse " << m.train_mse << "  valid_mse " << m.valid_mse
          << "  valid_spearman " << m.valid_spearman << '\n';
  models::save_predictor(result.predictor, r.dir / "predictor.ck");
  auto f = open_output(r.dir / "metrics.tsv");
  training::write_predictor_metrics(f, result.metrics);
}

void cmd_make_oracle(Run& r) {
  const std::size_t length = r.cfg.count("data", "length", 36);
  const auto oracle = make_oracle(r, length);
  oracle.save(r.dir / "oracle.json");
  r.out << "oracle with " << oracle.motifs().size() << " motifs, strongest consensus "
        << oracle.strongest_consensus().str() << '\n';
}

design::Term parse_term(const std::string& spec) {
  std::string body = spec;
  double w = 1.0;
  if (const auto star = body.rfind('*'); star != std::string::npos) {
    try {
      std::size_t used = 0;
      w = std::stod(body.substr(star + 1), &used);
      if (used != body.size() - star - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ConfigError("[design] terms: bad weight in '" + spec + "'");
    }
    body.resize(star);
  }
  const auto colon = body.find(':');
  if (colon == std::string::npos) throw ConfigError("[design] terms: expected kind:argument, got '" + spec + "'");
  const std::string kind = body.substr(0, colon), arg = body.substr(colon + 1);
  design::Term t;
  t.weight = std::abs(w);
  t.sign = w < 0 ? -1 : 1;
  const std::string name = kind + ":" + arg;
  if (kind == "pwm") {
    t.scorer = std::make_shared<design::PwmScorer>(models::Pwm::delta(seq::DnaSequence(arg)), name);
  } else if (kind == "pwm_file") {
    require_file(arg, "motif file");
    t.scorer = std::make_shared<design::PwmScorer>(models::Pwm::load_tsv(arg), name);
  } else if (kind == "predictor") {
    require_file(arg, "predictor checkpoint");
    t.scorer = std::make_shared<design::PredictorScorer>(models::load_predictor(arg), name);
  } else if (kind == "oracle") {
    require_file(arg, "oracle");
    t.scorer = std::make_shared<design::OracleScorer>(seq::SyntheticOracle::load(arg), name);
  } else if (kind == "channel") {
    const int b = arg.size() == 1 ? seq::base_index(arg[0]) : -1;
    if (b < 0) throw ConfigError("[design] terms: channel expects one of A, C, G, T");
    t.scorer = std::make_shared<design::ChannelMassScorer>(static_cast<std::size_t>(b), name);
  } else {
    throw ConfigError("[design] terms: unknown kind '" + kind + "'");
  }
  return t;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void write_score_histogram(std::ostream& out, double bin,
                           const std::vector<std::pair<std::string, std::vector<double>>>& cohorts) {
  out << "bin_start\tbin_end\tcount\tcohort\n";
  const auto bins = static_cast<std::size_t>(std::ceil(1.0 / bin - 1e-9));
  for (const auto& [name, scores] : cohorts) {
    std::vector<std::size_t> counts(bins, 0);
    for (double s : scores)
      ++counts[std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, s) / bin))];
    for (std::size_t k = 0; k < bins; ++k)
      out << static_cast<double>(k) * bin << '\t' << std::min(1.0, static_cast<double>(k + 1) * bin)
          << '\t' << counts[k] << '\t' << name << '\n';
  }
}

int cmd_design(Run& r) {
  Config& c = r.cfg;
  design::Objective obj;
  for (const auto& t : split_list(c.require("design", "terms"))) obj.terms.push_back(parse_term(t));
  obj.check();

  design::DesignConfig dc;
  const std::string mode = c.text("design", "mode", c.has("design", "generator") ? "joint" : "direct");
  if (mode != "joint" && mode != "direct") throw ConfigError("[design] mode must be joint or direct");
  dc.mode = mode == "joint" ? design::Mode::Joint : design::Mode::Direct;
  dc.step_size = c.real("design", "step_size", dc.step_size);
  dc.prior_weight = c.real("design", "prior_weight", dc.prior_weight);
  dc.noise_std = c.real("design", "noise_std", dc.noise_std);
  dc.max_steps = c.count("design", "max_steps", dc.max_steps);
  dc.restarts = c.count("design", "restarts", dc.restarts);
  dc.beta1 = c.real("design", "beta1", dc.beta1);
  dc.beta2 = c.real("design", "beta2", dc.beta2);
  dc.plain_steps = c.flag("design", "plain_steps", dc.plain_steps);
  dc.tolerance = c.real("design", "tolerance", dc.tolerance);
  dc.patience = c.count("design", "patience", dc.patience);
  dc.seed = derive_seed(r.seed, "design");
  dc.check();

  design::DesignResult result;
  if (dc.mode == design::Mode::Joint) {
    const fs::path gpath = c.require("design", "generator");
    require_file(gpath, "generator checkpoint");
    const auto gan = models::load_gan(gpath);
    result = design::joint_design(gan.gen, obj, dc);
  } else {
    std::optional<std::size_t> length;
    for (const auto& t : obj.terms)
      if (auto l = t.scorer->length()) length = *l;
    if (!length) c.require("design", "length");
    const std::size_t l = c.count("design", "length", length.value_or(0));
    result = design::direct_design(obj, l, dc);
  }

  std::optional<seq::SyntheticOracle> oracle;
  if (auto p = c.maybe("design", "score_oracle")) {
    require_file(*p, "oracle");
    oracle = seq::SyntheticOracle::load(*p);
  }
  std::optional<models::Pwm> motif;
  double motif_threshold = 0.0;
  if (c.has("design", "motif")) {
    motif = models::Pwm::delta(seq::DnaSequence(c.require("design", "motif")));
    double peak = 0.0;
    for (const auto& row : motif->rows()) peak += *std::max_element(row.begin(), row.end());
    motif_threshold = c.real("design", "motif_fraction", 0.9) * peak;
  }
  design::ReportOptions ro;
  ro.oracle = oracle ? &*oracle : nullptr;
  ro.motif = motif ? &*motif : nullptr;
  ro.motif_threshold = motif_threshold;
  const auto report = design::design_report(result, ro);
  {
    auto f = open_output(r.dir / "design.tsv");
    report.write_tsv(f);
  }
  {
    auto f = open_output(r.dir / "summary.tsv");
    report.write_summary(f);
  }
  {
    auto f = open_output(r.dir / "trajectories.tsv");
    design::write_trajectories(f, result);
  }

  std::vector<seq::DnaSequence> designed;
  for (const auto& rr : result.restarts) {
    if (rr.ok)
      designed.push_back(rr.sequence);
    else
      r.out << "restart " << rr.restart << " failed: " << rr.error << '\n';
  }

  std::optional<seq::ScoredDataset> reference;
  if (auto p = c.maybe("design", "reference")) {
    require_file(*p, "reference dataset");
    reference = seq::ScoredDataset::load_tsv(*p);
    if (c.has("design", "reference_percentile"))
      reference = seq::percentile_filter(*reference, c.real("design", "reference_percentile", 100.0));
  }
  if (oracle && reference) {
    const double bin = c.real("design", "hist_bin", 0.05);
    if (!(bin > 0.0 && bin <= 1.0)) throw ConfigError("[design] hist_bin must lie in (0, 1]");
    auto f = open_output(r.dir / "score_histogram.tsv");
    write_score_histogram(f, bin, {{"train", oracle->score(reference->sequences)}, {"designed", oracle->score(designed)}});
  }
  if (obj.terms.size() == 2) {
    const auto& a = obj.terms[0];
    const auto& b = obj.terms[1];
    auto points = [&](const std::vector<seq::DnaSequence>& seqs) {
      std::vector<design::ParetoPoint> pts;
      for (const auto& s : seqs)
        pts.push_back({a.sign * a.weight, b.sign * b.weight, s.str(), a.scorer->score(s), b.scorer->score(s)});
      return pts;
    };
    auto f = open_output(r.dir / "scatter.tsv");
    design::write_scatter_tsv(f, "designed", points(designed), true);
    if (reference) design::write_scatter_tsv(f, "train", points(reference->sequences), false);
  }

  r.out << result.succeeded() << " of " << result.restarts.size() << " restarts succeeded; max t "
        << report.max_t << ", mean t " << report.mean_t << '\n';
  if (oracle) r.out << "oracle max " << report.max_oracle << ", mean " << report.mean_oracle << '\n';
  return result.succeeded() > 0 ? kExitOk : kExitTraining;
}

// ---- eval ----------------------------------------------------------------------

models::Generator eval_generator(Config& c) {
  const fs::path p = c.require("eval", "generator");
  require_file(p, "generator checkpoint");
  return models::load_gan(p).gen;
}

ad::Tensor sample_outputs(const models::Generator& gen, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return models::generate(gen, training::sample_latent(n, gen.spec.latent_dim, rng));
}

std::vector<seq::DnaSequence> eval_sequences(Run& r, const std::string& key, const std::string& tag) {
  Config& c = r.cfg;
  const std::string input = c.text("eval", key, "generator");
  if (input == "generator") {
    const auto gen = eval_generator(c);
    return seq::decode_batch(sample_outputs(gen, c.count("eval", "samples", 1000), derive_seed(r.seed, tag)));
  }
  return load_sequences(input, c.count("eval", "window", 50), r.out);
}

void eval_interpolate(Run& r) {
  Config& c = r.cfg;
  const auto gen = eval_generator(c);
  std::mt19937_64 rng(derive_seed(r.seed, "interpolate"));
  const ad::Tensor zs = training::sample_latent(2, gen.spec.latent_dim, rng);
  const std::size_t d = gen.spec.latent_dim;
  ad::Tensor z1({d}), z2({d});
  for (std::size_t k = 0; k < d; ++k) {
    z1[k] = zs.at(0, k);
    z2[k] = zs.at(1, k);
  }
  const auto path = eval::interpolate_latent(gen, z1, z2, c.count("eval", "steps", 10));
  auto f = open_output(r.dir / "interpolation.tsv");
  eval::write_interpolation_tsv(f, path);
  r.out << path.size() << " points, " << eval::count_decode_changes(path) << " decoded base changes\n";
}

void eval_invert_reflect(Run& r) {
  Config& c = r.cfg;
  const auto gen = eval_generator(c);
  std::string target = c.text("eval", "target", "");
  if (target.empty()) target = std::string(gen.spec.length, c.text("eval", "target_base", "G").at(0));
  eval::InvertConfig ic;
  ic.max_steps = c.count("eval", "max_steps", ic.max_steps);
  ic.step_size = c.real("eval", "step_size", ic.step_size);
  ic.match_threshold = c.real("eval", "match_threshold", ic.match_threshold);
  const auto inv = eval::invert_generator(gen, seq::DnaSequence(target), c.count("eval", "points", 16),
                                          derive_seed(r.seed, "invert"), ic);
  for (const auto& w : inv.warnings) r.out << "warning: " << w << '\n';
  {
    auto f = open_output(r.dir / "inversion.tsv");
    f << "point\tmatch_rate\taccepted\n";
    f.precision(17);
    for (std::size_t i = 0; i < inv.all_rates.size(); ++i)
      f << i << '\t' << inv.all_rates[i] << '\t' << (inv.all_rates[i] >= ic.match_threshold ? 1 : 0) << '\n';
  }
  r.out << inv.latents.size() << " of " << inv.all_rates.size() << " starts inverted " << target << '\n';
  if (inv.latents.empty()) return;
  const auto logo = eval::logo_from_frequencies(eval::reflect_and_summarize(gen, inv.latents));
  auto f = open_output(r.dir / "reflection.tsv");
  eval::write_logo_tsv(f, logo);
}

void eval_distances(Run& r) {
  Config& c = r.cfg;
  const std::string ref_path = c.require("eval", "reference");
  const std::size_t window = c.count("eval", "window", 50);
  const auto reference = load_sequences(ref_path, window, r.out);
  const std::string query_src = c.text("eval", "queries", "generator");
  const auto queries = eval_sequences(r, "queries", "queries");
  const bool include_self = c.flag("eval", "include_self", false);
  const bool same = query_src == ref_path;
  std::vector<std::pair<std::string, eval::DistanceDistribution>> cohorts;
  cohorts.emplace_back(query_src == "generator" ? "generated" : "queries",
                       eval::distance_distribution(queries, reference, same && !include_self));
  if (auto h = c.maybe("eval", "holdout")) {
    const auto holdout = load_sequences(*h, window, r.out);
    cohorts.emplace_back("holdout", eval::distance_distribution(holdout, reference));
  }
  auto f = open_output(r.dir / "distances.tsv");
  eval::write_histogram_tsv(f, cohorts);
  for (const auto& [name, d] : cohorts) {
    const auto lo = d.minima.empty() ? 0 : *std::min_element(d.minima.begin(), d.minima.end());
    r.out << name << ": " << d.minima.size() << " queries, mean minimum distance " << d.mean
          << ", smallest " << lo << '\n';
  }
}

void eval_logos(Run& r) {
  const auto seqs = eval_sequences(r, "input", "logos");
  const auto logo = eval::logo_matrix(seqs);
  auto f = open_output(r.dir / "logo.tsv");
  eval::write_logo_tsv(f, logo);
  r.out << "logo over " << seqs.size() << " sequences\n";
}

void eval_exon_align(Run& r) {
  Config& c = r.cfg;
  const std::size_t flank = c.count("eval", "flank", 5);
  const double threshold = c.real("eval", "threshold", 0.5);
  const std::string input = c.text("eval", "input", "generator");
  std::vector<seq::DnaSequence> seqs;
  std::vector<std::vector<double>> tracks;
  if (input == "generator") {
    const auto gen = eval_generator(c);
    if (!gen.spec.annotation) throw ConfigError("exon-align needs a generator trained with an annotation track");
    const std::size_t n = c.count("eval", "samples", 1000);
    const ad::Tensor x = sample_outputs(gen, n, derive_seed(r.seed, "exon"));
    seqs = seq::decode_batch(x);
    const std::size_t l = gen.spec.length;
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<double> t(l);
      for (std::size_t i = 0; i < l; ++i) t[i] = x.data()[(b * l + i) * 5 + 4];
      tracks.push_back(std::move(t));
    }
  } else if (input == "data") {
    const std::string source = c.require("data", "source");
    if (source != "exon") throw ConfigError("exon-align with input = data needs [data] source = exon");
    auto data = seq::synth_exon_dataset(exon_spec(r));
    seqs = std::move(data.sequences);
    tracks = std::move(data.tracks);
  } else {
    throw ConfigError("[eval] input for exon-align must be generator or data");
  }
  const auto logos = eval::align_boundary_logos(seqs, tracks, flank, threshold);
  for (const auto& w : logos.warnings) r.out << "warning: " << w << '\n';
  std::size_t contiguous = 0;
  {
    auto f = open_output(r.dir / "spans.tsv");
    f << "sample\tfirst\tlast\tcontiguous\n";
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const auto span = eval::exon_spans(tracks[i], threshold);
      const bool one = eval::single_contiguous_span(tracks[i], threshold);
      contiguous += one ? 1 : 0;
      if (span)
        f << i << '\t' << span->first << '\t' << span->second << '\t' << (one ? 1 : 0) << '\n';
      else
        f << i << "\tNA\tNA\t0\n";
    }
  }
  r.out << contiguous << " of " << tracks.size() << " tracks form one contiguous span; "
        << logos.aligned << " aligned, " << logos.skipped << " skipped\n";
  if (logos.aligned == 0) return;
  {
    auto f = open_output(r.dir / "start_logo.tsv");
    eval::write_logo_tsv(f, logos.start, -static_cast<long>(flank));
  }
  auto f = open_output(r.dir / "end_logo.tsv");
  eval::write_logo_tsv(f, logos.end, -static_cast<long>(flank));
  r.out << "peak information offset: start " << eval::peak_information_offset(logos.start, flank)
        << ", end " << eval::peak_information_offset(logos.end, flank) << '\n';
}

void eval_complementation(Run& r) {
  Config& c = r.cfg;
  eval::ComplementationRecipe recipe;
  recipe.data.count = c.count("data", "count", 10000);
  recipe.data.length = c.count("data", "length", 20);
  recipe.data.pwm = motif_from(c, "data");
  recipe.data.planting_prob = c.real("data", "planting_prob", 1.0);
  recipe.gen.length = recipe.disc.length = recipe.data.length;
  recipe.gen.latent_dim = c.count("model", "latent_dim", 100);
  recipe.gen.channels = recipe.disc.channels = c.count("model", "channels", 64);
  recipe.gen.resblocks = recipe.disc.resblocks = c.count("model", "resblocks", 5);
  recipe.gen.filter_length = recipe.disc.filter_length = c.count("model", "filter_length", 5);
  recipe.gen.residual_scale = recipe.disc.residual_scale = c.real("model", "residual_scale", 0.3);
  recipe.train.batch = c.count("train", "batch", 64);
  recipe.train.steps = c.count("train", "steps", 1000);
  recipe.train.critic_steps = c.count("train", "critic_steps", 5);
  recipe.train.lambda = c.real("train", "lambda", 10.0);
  recipe.train.adam = adam_from(c, "train", recipe.train.adam);
  recipe.train.snapshot_every = 0;
  recipe.target_base = c.text("eval", "target_base", "G").at(0);
  recipe.inversion_points = c.count("eval", "points", 16);
  recipe.invert.max_steps = c.count("eval", "max_steps", recipe.invert.max_steps);
  recipe.invert.step_size = c.real("eval", "step_size", recipe.invert.step_size);
  recipe.invert.match_threshold = c.real("eval", "match_threshold", recipe.invert.match_threshold);

  std::vector<eval::ComplementationReport> reports;
  for (const auto& order : split_list(c.text("eval", "channel_orders", "ACGT,TGCA"))) {
    const auto enc = seq::Encoding::from_channel_order(order);
    r.out << "channel order " << order << ": training" << std::endl;
    reports.push_back(eval::complementation_sweep(enc, recipe, derive_seed(r.seed, "complement:" + order)));
    const auto& rep = reports.back();
    r.out << "  inverted " << rep.inverted << ", modal bases " << rep.modal_bases
          << (rep.complement_match ? "  (complement)" : "") << '\n';
    if (rep.inverted > 0) {
      auto f = open_output(r.dir / ("reflection_" + order + ".tsv"));
      eval::write_logo_tsv(f, eval::logo_from_frequencies(rep.reflected));
    }
  }
  auto f = open_output(r.dir / "complementation.tsv");
  eval::write_complementation_tsv(f, reports);
}

int dispatch(const std::string& command, Run& r) {
  if (command == "train-gan") cmd_train_gan(r);
  else if (command == "train-predictor") cmd_train_predictor(r);
  else if (command == "make-oracle") cmd_make_oracle(r);
  else if (command == "design") return cmd_design(r);
  else if (command == "eval interpolate") eval_interpolate(r);
  else if (command == "eval invert-reflect") eval_invert_reflect(r);
  else if (command == "eval distances") eval_distances(r);
  else if (command == "eval logos") eval_logos(r);
  else if (command == "eval exon-align") eval_exon_align(r);
  else if (command == "eval complementation") eval_complementation(r);
  else throw std::logic_error("unhandled command " + command);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generative design of DNA sequences: WGAN training, predictors, latent-space design"};
  app.name("dnagen");
  app.require_subcommand(1);
  Flags flags;
  std::string command;

  auto common = [&](CLI::App* sub, const std::string& name, bool percentile) {
    sub->add_option("--config", flags.config, "experiment config file")->required();
    sub->add_option("--seed", flags.seed, "root seed, overrides the config");
    sub->add_option("--out", flags.out, "run directory (default runs/<timestamp>-<hash>)");
    if (percentile)
      sub->add_option("--percentile", flags.percentile, "keep data at or below this score percentile");
    sub->callback([&command, name] { command = name; });
  };
  common(app.add_subcommand("train-gan", "train a WGAN-GP generator"), "train-gan", true);
  common(app.add_subcommand("train-predictor", "train a property predictor"), "train-predictor", true);
  common(app.add_subcommand("make-oracle", "write a synthetic scoring oracle"), "make-oracle", false);
  common(app.add_subcommand("design", "optimize sequences for an objective"), "design", false);
  auto* ev = app.add_subcommand("eval", "analyses of trained models");
  ev->require_subcommand(1);
  for (const char* name : {"interpolate", "invert-reflect", "distances", "logos", "exon-align", "complementation"})
    common(ev->add_subcommand(name), std::string("eval ") + name, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Config cfg = Config::load(flags.config);
    if (flags.seed) cfg.set("", "seed", std::to_string(*flags.seed));
    if (flags.percentile) {
      std::ostringstream p;
      p << *flags.percentile;
      cfg.set("data", "percentile", p.str());
    }
    Run r{cfg, out, make_run_dir(flags, cfg, command), cfg.seed()};
    out << command << " -> " << r.dir.string() << '\n';
    int code = kExitOk;
    try {
      code = dispatch(command, r);
    } catch (...) {
      write_text(r.dir / "config.ini", cfg.resolved());
      throw;
    }
    write_text(r.dir / "config.ini", cfg.resolved());
    return code;
  } catch (const TrainingError& e) {
    err << "training aborted: " << e.what() << '\n';
    return kExitTraining;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EncodingError& e) {
    err << "bad sequence input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dnagen::cli
