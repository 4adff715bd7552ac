// Copyright 2026 The maskgrid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "maskgrid/binary_io.hpp"
#include "maskgrid/experiment.hpp"
#include "maskgrid/metrics.hpp"
#include "maskgrid/scheduler.hpp"

namespace fs = std::filesystem;
using namespace maskgrid;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kIo = 3, kValidation = 4 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON experiment config (defaults when omitted)");
  cmd->add_option("--seed", c.seed, "override the global seed");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void print_config(const ExperimentConfig& cfg) {
  std::cout << "# seed=" << cfg.seed << "\n# resolved config:\n" << config_to_json(cfg);
}

void check_task(const ExperimentConfig& cfg, const DatasetManifest& m) {
  if (!(m.task == cfg.resolved_task()))
    throw ConfigError("dataset manifest task does not match the config (geometry, rule or seed differ)");
}

int run_gen_data(const Common& c, const std::string& out, std::optional<int> count) {
  ExperimentConfig cfg = resolve(c);
  if (count) cfg.count = *count;
  cfg.validate();
  print_config(cfg);
  gen_dataset(out, cfg.resolved_task(), cfg.count, c.threads);
  const SplitSizes s = split_sizes(cfg.count);
  std::cout << "dataset=" << out << "\ntrain=" << s.train << "\nvalid=" << s.valid << "\ntest=" << s.test << "\n";
  return kOk;
}

int run_train(const Common& c, const std::string& data, const std::string& out, std::optional<int> steps) {
  ExperimentConfig cfg = resolve(c);
  if (steps) cfg.train.total_steps = *steps;
  cfg.validate();
  print_config(cfg);
  check_task(cfg, read_manifest(data));
  const auto train_set = load_split(data, "train");
  std::vector<TrainExample> examples;
  for (const auto& ex : train_set) examples.push_back(ex.train_example());

  const Model model(cfg.model_config());
  Checkpoint ckpt{cfg, model.init_params(derive_seed(cfg.seed, "model.init")), {}};
  TrainConfig tc = cfg.train;
  tc.threads = c.threads;
  const auto rows = train_model(model, ckpt.model_params, examples, tc, derive_seed(cfg.seed, "train"),
                                [&](const TrainLogRow& r) {
                                  if (r.step % 100 == 0 || r.step + 1 == tc.total_steps)
                                    std::cerr << "step " << r.step << " l_mask " << r.loss.l_mask << " acc "
                                              << r.loss.accuracy << "\n";
                                });

  const Scav scav(cfg.scav_config());
  ckpt.scav_params = scav.init_params(derive_seed(cfg.seed, "scav.init"));
  std::vector<std::pair<Mat, Mat>> pairs;
  for (const auto& ex : train_set) pairs.emplace_back(ex.bundle.streams.at(0).features, ex.beats);
  ScavTrainConfig stc = cfg.scav_train;
  stc.seed = derive_seed(cfg.seed, "scav.train");
  stc.threads = c.threads;
  const auto scav_losses = train_scav(scav, ckpt.scav_params, pairs, stc);

  save_checkpoint(out, ckpt);
  io::write_file((fs::path(out) / "train_log.csv").string(), train_log_csv(rows));
  std::cout << "checkpoint=" << out << "\nfinal_l_mask=" << rows.back().loss.l_mask
            << "\nfinal_scav_loss=" << scav_losses.back() << "\n";
  return kOk;
}

struct SampleArgs {
  std::string checkpoint, data, out, dump_schedule, trace;
  int index = -1;
  int beams = 1;
  std::optional<int> steps;
  std::optional<double> gamma, delta, temp;
  std::optional<std::uint64_t> seed;
  bool two_pass = false;
  int threads = 1;
};

int run_sample(const SampleArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const ExperimentConfig& cfg = ckpt.config;
  SamplerConfig sc = cfg.sampler;
  if (a.steps) sc.n_steps = *a.steps;
  if (a.gamma) sc.gamma = *a.gamma;
  if (a.delta) sc.delta = *a.delta;
  if (a.temp) sc.temperature = *a.temp;
  if (a.two_pass) sc.force_two_pass = true;
  sc.validate();
  const DatasetManifest m = read_manifest(a.data);
  check_task(cfg, m);
  const int index = a.index >= 0 ? a.index : split_sizes(m.count).train + split_sizes(m.count).valid;
  sc.seed = a.seed ? *a.seed : derive_seed(cfg.seed, "sample", index);
  print_config(cfg);
  std::cout << "# sampler: n_steps=" << sc.n_steps << " gamma=" << sc.gamma << " delta=" << sc.delta
            << " temperature=" << sc.temperature << " seed=" << sc.seed << " beams=" << a.beams << "\n";

  const DatasetExample ex = load_example(a.data, index);
  const Model model(cfg.model_config());
  const TransformerLogits lm(model, ckpt.model_params);
  const auto beams = sample_beams(lm, &ex.bundle, cfg.task.length, sc, a.beams, a.threads);
  const SyntheticTask task(cfg.resolved_task());
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create output directory " + a.out + ": " + ec.message());
  for (int b = 0; b < a.beams; ++b) {
    const std::string stem = (fs::path(a.out) / ("beam_" + std::to_string(b))).string();
    save_codegram(stem + ".codegram", beams[b].codegram);
    save_embeddings(stem + ".beats.emb", EmbeddingSet{task.beats_features(beams[b].codegram), "beats-like"});
    std::cout << "beam=" << b << " file=" << stem << ".codegram forward_passes=" << beams[b].forward_passes
              << " exact_match=" << (beams[b].codegram == ex.codegram ? 1 : 0) << "\n";
  }
  if (!a.dump_schedule.empty())
    io::write_file(a.dump_schedule,
                   schedule_to_csv(build_sample_schedule(cfg.task.length * cfg.task.levels, sc.n_steps)));
  if (!a.trace.empty()) io::write_file(a.trace, trace_to_csv(beams[0].trace));
  std::cout << codegram_to_text(beams[0].codegram);
  return kOk;
}

int run_select(const std::string& scav_dir, const std::string& video, std::vector<std::string> cands,
               int beams, const std::string& beam_dir, int threads) {
  if (beams > 0) {
    for (int b = 0; b < beams; ++b)
      cands.push_back((fs::path(beam_dir) / ("beam_" + std::to_string(b) + ".beats.emb")).string());
  }
  const Checkpoint ckpt = load_checkpoint(scav_dir);
  const Scav scav(ckpt.config.scav_config());
  std::cout << "# seed=" << ckpt.config.seed << "\n";
  const Mat clip = load_embeddings(video).vectors;
  std::vector<Mat> candidates;
  for (const auto& path : cands) candidates.push_back(load_embeddings(path).vectors);
  std::vector<double> dist;
  const int best = select_best(scav, ckpt.scav_params, clip, candidates, threads, &dist);
  std::cout << "selected=" << best << "\ndistances=";
  for (std::size_t i = 0; i < dist.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.9g", i ? "," : "", dist[i]);
    std::cout << buf;
  }
  std::cout << "\n";
  return kOk;
}

int run_eval(const std::string& generated, const std::string& reference, int kernel) {
  const EmbeddingSet gen = load_embeddings(generated);
  const EmbeddingSet ref = load_embeddings(reference);
  if (gen.vectors.cols() != ref.vectors.cols()) throw ShapeError("embedding widths differ");
  const double fd = frechet_distance(fit_gaussian(gen.vectors), fit_gaussian(ref.vectors));
  const double ns = novelty_score(gen.vectors, ref.vectors, kernel);
  const double cos = cosine_semantic(gen.vectors.colwise().mean().transpose(),
                                     ref.vectors.colwise().mean().transpose());
  std::cout << "# front_ends=" << gen.front_end << "," << ref.front_end << " kernel=" << kernel << "\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "fd=%.6f\nnovelty_score=%.6f\ncosine_mean=%.6f\n", fd, ns, cos);
  std::cout << buf;
  return kOk;
}

int run_pipeline_cmd(const Common& c, const std::string& workdir, std::optional<int> steps) {
  ExperimentConfig cfg = resolve(c);
  if (steps) cfg.train.total_steps = *steps;
  cfg.validate();
  print_config(cfg);
  const PipelineReport report = run_pipeline(cfg, workdir, c.threads, std::cerr);
  const std::string text = report.to_text();
  io::write_file((fs::path(workdir) / "report.txt").string(), text);
  std::cout << text;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maskgrid: masked token-grid generation toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string out, data, workdir;
  std::optional<int> count, steps;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  add_common(gen, common);
  gen->add_option("--out", out, "dataset directory")->required();
  gen->add_option("--count", count, "number of examples");

  auto* train = app.add_subcommand("train", "train the generator and the selector");
  add_common(train, common);
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--out", out, "checkpoint directory")->required();
  train->add_option("--steps", steps, "training steps");

  SampleArgs sa;
  auto* samp = app.add_subcommand("sample", "sample codegrams for one dataset example");
  samp->add_option("--checkpoint", sa.checkpoint, "checkpoint directory")->required();
  samp->add_option("--data", sa.data, "dataset directory")->required();
  samp->add_option("--out", sa.out, "output directory")->required();
  samp->add_option("--index", sa.index, "example index (default: first test example)");
  samp->add_option("--beams", sa.beams, "independent samples")->check(CLI::PositiveNumber);
  samp->add_option("--steps", sa.steps, "sampling steps");
  samp->add_option("--gamma", sa.gamma, "guidance scale");
  samp->add_option("--delta", sa.delta, "diversity noise scale");
  samp->add_option("--temp", sa.temp, "multinomial temperature");
  samp->add_option("--seed", sa.seed, "sampler seed");
  samp->add_option("--threads", sa.threads, "worker threads")->check(CLI::PositiveNumber);
  samp->add_flag("--two-pass", sa.two_pass, "run the unconditional pass even when gamma is 0");
  samp->add_option("--dump-schedule", sa.dump_schedule, "write the masking schedule as CSV");
  samp->add_option("--trace", sa.trace, "write the per-step trace of beam 0 as CSV");

  std::string scav_dir, video, beam_dir;
  std::vector<std::string> candidates;
  int sel_threads = 1, sel_beams = 0;
  auto* sel = app.add_subcommand("select", "pick the candidate closest to the video");
  sel->add_option("--scav-checkpoint", scav_dir, "checkpoint directory holding scav.ckpt")->required();
  sel->add_option("--video", video, "clip-like embedding file")->required();
  sel->add_option("--candidates", candidates, "beats-like embedding files");
  sel->add_option("--beams", sel_beams, "read beam_0..beam_{B-1}.beats.emb from --beam-dir");
  sel->add_option("--beam-dir", beam_dir, "output directory of `sample`");
  sel->add_option("--threads", sel_threads, "worker threads")->check(CLI::PositiveNumber);

  std::string generated, reference;
  int kernel = 8;
  auto* ev = app.add_subcommand("eval", "FD, novelty and cosine between two embedding sets");
  ev->add_option("--generated", generated, "embedding file")->required();
  ev->add_option("--reference", reference, "embedding file")->required();
  ev->add_option("--kernel", kernel, "novelty kernel size");

  auto* pipe = app.add_subcommand("pipeline", "gen-data, train, sample, select and eval in one run");
  add_common(pipe, common);
  pipe->add_option("--workdir", workdir, "working directory")->required();
  pipe->add_option("--steps", steps, "training steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (sel->parsed() && (candidates.empty() == (sel_beams == 0) || (sel_beams > 0 && beam_dir.empty()))) {
    std::cerr << "select: give either --candidates or --beams with --beam-dir\n";
    return kUsage;
  }

  try {
    if (gen->parsed()) return run_gen_data(common, out, count);
    if (train->parsed()) return run_train(common, data, out, steps);
    if (samp->parsed()) return run_sample(sa);
    if (sel->parsed()) return run_select(scav_dir, video, candidates, sel_beams, beam_dir, sel_threads);
    if (ev->parsed()) return run_eval(generated, reference, kernel);
    if (pipe->parsed()) return run_pipeline_cmd(common, workdir, steps);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}
