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

#include "maskgrid/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <ostream>

#include "maskgrid/binary_io.hpp"
#include "maskgrid/json_fields.hpp"
#include "maskgrid/metrics.hpp"
#include "maskgrid/parallel.hpp"

namespace maskgrid {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
  train.peak_lr = 2e-3;
  train.total_steps = 2000;
  scav_train.steps = 300;
}

SyntheticTaskSpec ExperimentConfig::resolved_task() const {
  SyntheticTaskSpec t = task;
  t.seed = derive_seed(seed, "task");
  return t;
}

ModelConfig ExperimentConfig::model_config() const {
  const SyntheticTask gen(resolved_task());
  ModelConfig m;
  m.structure = structure;
  m.spec = task.codebook();
  m.hidden = hidden;
  m.heads = heads;
  m.depth = depth;
  m.encoder_depth = encoder_depth;
  m.mlp_ratio = mlp_ratio;
  m.max_len = task.length;
  m.max_cond_len = std::max(task.clip_frames, task.length);
  m.streams = gen.stream_specs();
  m.aux_channels = task.beats_channels;
  m.cond_dropout_prob = cond_dropout_prob;
  return m;
}

ScavConfig ExperimentConfig::scav_config() const {
  ScavConfig s = scav;
  s.video_channels = task.clip_channels;
  s.audio_channels = task.beats_channels;
  return s;
}

void ExperimentConfig::validate() const {
  task.validate();
  if (count < 10) throw ConfigError("count must be >= 10 so every split is non-empty");
  try {
    model_config().validate();
    scav_config().validate();
    sampler.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (train.total_steps < 1 || train.batch_size < 1 || train.warmup_steps < 0 || train.peak_lr <= 0.0)
    throw ConfigError("train: steps, batch_size and peak_lr must be positive");
  if (scav_train.steps < 1 || scav_train.batch_size < 2) throw ConfigError("scav_train: steps >= 1, batch_size >= 2");
  if (eval.beams < 1 || eval.max_examples < 0 || eval.selection_candidates < 2 || eval.novelty_kernel < 2 ||
      eval.novelty_kernel % 2 != 0 || eval.novelty_kernel > task.length)
    throw ConfigError("eval: beams >= 1, candidates >= 2, novelty_kernel even and <= task length");
}

namespace {

json to_json(const ExperimentConfig& c) {
  const auto& t = c.task;
  const auto& tr = c.train;
  const auto& s = c.sampler;
  return json{
      {"version", ExperimentConfig::kVersion},
      {"seed", c.seed},
      {"count", c.count},
      {"task",
       {{"rule", rule_name(t.rule)},
        {"length", t.length},
        {"levels", t.levels},
        {"vocab", t.vocab},
        {"symbols", t.symbols},
        {"clip_frames", t.clip_frames},
        {"clip_channels", t.clip_channels},
        {"s3d_channels", t.s3d_channels},
        {"beats_channels", t.beats_channels},
        {"phase_period", t.phase_period},
        {"noise", t.noise}}},
      {"model",
       {{"structure", structure_name(c.structure)},
        {"hidden", c.hidden},
        {"heads", c.heads},
        {"depth", c.depth},
        {"encoder_depth", c.encoder_depth},
        {"mlp_ratio", c.mlp_ratio},
        {"cond_dropout_prob", c.cond_dropout_prob}}},
      {"train",
       {{"lambda_reg", tr.lambda_reg},
        {"lambda_cont", tr.lambda_cont},
        {"peak_lr", tr.peak_lr},
        {"floor_lr", tr.floor_lr},
        {"warmup_steps", tr.warmup_steps},
        {"total_steps", tr.total_steps},
        {"decay_power", tr.decay_power},
        {"weight_decay", tr.weight_decay},
        {"beta1", tr.beta1},
        {"beta2", tr.beta2},
        {"adam_eps", tr.adam_eps},
        {"grad_clip", tr.grad_clip},
        {"batch_size", tr.batch_size}}},
      {"sampler",
       {{"n_steps", s.n_steps},
        {"gamma", s.gamma},
        {"delta", s.delta},
        {"temperature", s.temperature},
        {"resample_committed", s.resample_committed},
        {"force_two_pass", s.force_two_pass}}},
      {"scav",
       {{"n_scav", c.scav.n_scav},
        {"h_scav", c.scav.h_scav},
        {"hidden", c.scav.hidden},
        {"audio_groups", c.scav.audio_groups},
        {"temperature", c.scav.temperature}}},
      {"scav_train",
       {{"steps", c.scav_train.steps},
        {"batch_size", c.scav_train.batch_size},
        {"lr", c.scav_train.lr},
        {"weight_decay", c.scav_train.weight_decay}}},
      {"eval",
       {{"beams", c.eval.beams},
        {"max_examples", c.eval.max_examples},
        {"novelty_kernel", c.eval.novelty_kernel},
        {"selection_candidates", c.eval.selection_candidates}}},
  };
}

template <typename Fn>
void section(JsonFields& top, const std::string& name, Fn&& fn) {
  if (const json* j = top.child(name)) {
    JsonFields f(*j, name);
    fn(f);
    f.finish();
  }
}

ExperimentConfig from_json(const json& j) {
  JsonFields top(j, "config");
  int version = -1;
  top.get("version", version);
  if (version != ExperimentConfig::kVersion)
    throw ConfigError("config version must be " + std::to_string(ExperimentConfig::kVersion) + ", got " +
                      std::to_string(version));
  ExperimentConfig c;
  top.get("seed", c.seed);
  top.get("count", c.count);
  section(top, "task", [&](JsonFields& f) {
    auto& t = c.task;
    std::string rule = rule_name(t.rule);
    f.get("rule", rule);
    try {
      t.rule = parse_rule(rule);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("task.rule: ") + e.what());
    }
    f.get("length", t.length);
    f.get("levels", t.levels);
    f.get("vocab", t.vocab);
    f.get("symbols", t.symbols);
    f.get("clip_frames", t.clip_frames);
    f.get("clip_channels", t.clip_channels);
    f.get("s3d_channels", t.s3d_channels);
    f.get("beats_channels", t.beats_channels);
    f.get("phase_period", t.phase_period);
    f.get("noise", t.noise);
  });
  section(top, "model", [&](JsonFields& f) {
    std::string structure = structure_name(c.structure);
    f.get("structure", structure);
    try {
      c.structure = parse_structure(structure);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("model.structure: ") + e.what());
    }
    f.get("hidden", c.hidden);
    f.get("heads", c.heads);
    f.get("depth", c.depth);
    f.get("encoder_depth", c.encoder_depth);
    f.get("mlp_ratio", c.mlp_ratio);
    f.get("cond_dropout_prob", c.cond_dropout_prob);
  });
  section(top, "train", [&](JsonFields& f) {
    auto& t = c.train;
    f.get("lambda_reg", t.lambda_reg);
    f.get("lambda_cont", t.lambda_cont);
    f.get("peak_lr", t.peak_lr);
    f.get("floor_lr", t.floor_lr);
    f.get("warmup_steps", t.warmup_steps);
    f.get("total_steps", t.total_steps);
    f.get("decay_power", t.decay_power);
    f.get("weight_decay", t.weight_decay);
    f.get("beta1", t.beta1);
    f.get("beta2", t.beta2);
    f.get("adam_eps", t.adam_eps);
    f.get("grad_clip", t.grad_clip);
    f.get("batch_size", t.batch_size);
  });
  section(top, "sampler", [&](JsonFields& f) {
    auto& s = c.sampler;
    f.get("n_steps", s.n_steps);
    f.get("gamma", s.gamma);
    f.get("delta", s.delta);
    f.get("temperature", s.temperature);
    f.get("resample_committed", s.resample_committed);
    f.get("force_two_pass", s.force_two_pass);
  });
  section(top, "scav", [&](JsonFields& f) {
    f.get("n_scav", c.scav.n_scav);
    f.get("h_scav", c.scav.h_scav);
    f.get("hidden", c.scav.hidden);
    f.get("audio_groups", c.scav.audio_groups);
    f.get("temperature", c.scav.temperature);
  });
  section(top, "scav_train", [&](JsonFields& f) {
    f.get("steps", c.scav_train.steps);
    f.get("batch_size", c.scav_train.batch_size);
    f.get("lr", c.scav_train.lr);
    f.get("weight_decay", c.scav_train.weight_decay);
  });
  section(top, "eval", [&](JsonFields& f) {
    f.get("beams", c.eval.beams);
    f.get("max_examples", c.eval.max_examples);
    f.get("novelty_kernel", c.eval.novelty_kernel);
    f.get("selection_candidates", c.eval.selection_candidates);
  });
  top.finish();
  c.validate();
  return c;
}

double tail_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const std::size_t n = std::max<std::size_t>(1, v.size() / 10);
  double s = 0.0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(n);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return from_json(j);
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(io::read_file(path)); }

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = "step,l_mask,l_mse,l_cont,lr,accuracy\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step, r.loss.l_mask, r.loss.l_mse,
                  r.loss.l_contrastive, r.loss.lr, r.loss.accuracy);
    out += buf;
  }
  return out;
}

std::vector<TrainLogRow> train_model(const Model& model, ParamVector& params,
                                     const std::vector<TrainExample>& examples, const TrainConfig& config,
                                     std::uint64_t seed,
                                     const std::function<void(const TrainLogRow&)>& progress) {
  require_arg(!examples.empty(), "no training examples");
  OptimizerState state;
  Rng rng(seed);
  std::vector<TrainLogRow> rows;
  rows.reserve(config.total_steps);
  std::vector<TrainExample> batch(config.batch_size);
  for (int step = 0; step < config.total_steps; ++step) {
    for (auto& b : batch) b = examples[rng.below(examples.size())];
    rows.push_back({step, train_step(model, params, state, batch, config, rng)});
    if (progress) progress(rows.back());
  }
  return rows;
}

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());
  const Model model(ckpt.config.model_config());
  const Scav scav(ckpt.config.scav_config());
  io::write_file((fs::path(dir) / "config.json").string(), config_to_json(ckpt.config));
  io::write_file((fs::path(dir) / "model.ckpt").string(), encode_checkpoint(model.layout(), ckpt.model_params));
  io::write_file((fs::path(dir) / "scav.ckpt").string(), encode_checkpoint(scav.layout(), ckpt.scav_params));
}

Checkpoint load_checkpoint(const std::string& dir) {
  Checkpoint c;
  c.config = load_config((fs::path(dir) / "config.json").string());
  const Model model(c.config.model_config());
  const Scav scav(c.config.scav_config());
  c.model_params = decode_checkpoint(model.layout(), io::read_file((fs::path(dir) / "model.ckpt").string()));
  c.scav_params = decode_checkpoint(scav.layout(), io::read_file((fs::path(dir) / "scav.ckpt").string()));
  return c;
}

std::string PipelineReport::to_text() const {
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"seed", std::to_string(seed)},
      {"train_examples", std::to_string(train_examples)},
      {"test_examples", std::to_string(test_examples)},
      {"train_steps", std::to_string(train_steps)},
      {"l_mask_tail", fmt(l_mask_tail)},
      {"masked_accuracy", fmt(masked_accuracy)},
      {"exact_match_rate", fmt(exact_match_rate)},
      {"fd_mfcc", fmt(fd_mfcc)},
      {"novelty_score", fmt(novelty)},
      {"selection_hit_rate", fmt(selection_hit_rate)},
      {"scav_loss_tail", fmt(scav_loss_tail)},
  };
  std::string out;
  std::size_t width = 0;
  for (const auto& [k, v] : rows) {
    out += k + "=" + v + "\n";
    width = std::max(width, k.size());
  }
  out += "\n";
  const std::string rule = "+" + std::string(width + 2, '-') + "+" + std::string(14, '-') + "+\n";
  out += rule;
  for (const auto& [k, v] : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "| %-*s | %12s |\n", static_cast<int>(width), k.c_str(), v.c_str());
    out += buf;
  }
  out += rule;
  return out;
}

PipelineReport run_pipeline(const ExperimentConfig& config, const std::string& workdir, int threads,
                            std::ostream& log) {
  config.validate();
  const SyntheticTaskSpec task_spec = config.resolved_task();
  const SyntheticTask task(task_spec);
  const std::string data_dir = (fs::path(workdir) / "data").string();

  log << "[gen-data] " << config.count << " examples -> " << data_dir << "\n";
  gen_dataset(data_dir, task_spec, config.count, threads);
  const auto train_set = load_split(data_dir, "train");
  const auto test_set = load_split(data_dir, "test");

  std::vector<TrainExample> train_examples, test_examples;
  for (const auto& ex : train_set) train_examples.push_back(ex.train_example());
  for (const auto& ex : test_set) test_examples.push_back(ex.train_example());

  const Model model(config.model_config());
  Checkpoint ckpt{config, model.init_params(derive_seed(config.seed, "model.init")), {}};
  TrainConfig tc = config.train;
  tc.threads = threads;
  log << "[train] " << model.layout().size() << " parameters, " << tc.total_steps << " steps\n";
  const int every = std::max(1, tc.total_steps / 10);
  const auto rows = train_model(model, ckpt.model_params, train_examples, tc, derive_seed(config.seed, "train"),
                                [&](const TrainLogRow& r) {
                                  if (r.step % every == 0 || r.step + 1 == tc.total_steps)
                                    log << "  step " << r.step << " l_mask " << fmt(r.loss.l_mask) << " acc "
                                        << fmt(r.loss.accuracy) << "\n";
                                });
  io::write_file((fs::path(workdir) / "train_log.csv").string(), train_log_csv(rows));

  const Scav scav(config.scav_config());
  ckpt.scav_params = scav.init_params(derive_seed(config.seed, "scav.init"));
  std::vector<std::pair<Mat, Mat>> pairs;
  for (const auto& ex : train_set) pairs.emplace_back(ex.bundle.streams.at(0).features, ex.beats);
  ScavTrainConfig stc = config.scav_train;
  stc.seed = derive_seed(config.seed, "scav.train");
  stc.threads = threads;
  log << "[train-scav] " << pairs.size() << " pairs, " << stc.steps << " steps\n";
  const auto scav_losses = train_scav(scav, ckpt.scav_params, pairs, stc);
  save_checkpoint((fs::path(workdir) / "checkpoint").string(), ckpt);

  PipelineReport report;
  report.seed = config.seed;
  report.train_examples = static_cast<int>(train_set.size());
  report.train_steps = tc.total_steps;
  std::vector<double> l_mask;
  for (const auto& r : rows) l_mask.push_back(r.loss.l_mask);
  report.l_mask_tail = tail_mean(l_mask);
  report.scav_loss_tail = tail_mean(scav_losses);
  report.masked_accuracy =
      evaluate_accuracy(model, ckpt.model_params, test_examples, derive_seed(config.seed, "eval.mask"), threads)
          .value_or(0.0);

  const int n_eval = config.eval.max_examples > 0
                         ? std::min<int>(config.eval.max_examples, static_cast<int>(test_set.size()))
                         : static_cast<int>(test_set.size());
  report.test_examples = n_eval;
  log << "[sample+select] " << n_eval << " test examples x " << config.eval.beams << " beams\n";
  const TransformerLogits lm(model, ckpt.model_params);
  int exact = 0;
  double novelty = 0.0;
  std::vector<Mat> gen_mfcc(n_eval), ref_mfcc(n_eval);
  for (int i = 0; i < n_eval; ++i) {
    const auto& ex = test_set[i];
    SamplerConfig sc = config.sampler;
    sc.seed = derive_seed(config.seed, "sample", ex.index);
    const auto beams = sample_beams(lm, &ex.bundle, task_spec.length, sc, config.eval.beams, threads);
    std::vector<Mat> candidates;
    for (const auto& b : beams) candidates.push_back(task.beats_features(b.codegram));
    const int pick = select_best(scav, ckpt.scav_params, ex.bundle.streams.at(0).features, candidates, threads);
    const Codegram& chosen = beams[pick].codegram;
    exact += chosen == ex.codegram;
    novelty += novelty_score(candidates[pick], ex.beats, config.eval.novelty_kernel);
    const auto gen_audio = task.render(chosen);
    const auto ref_audio = task.render(ex.codegram);
    gen_mfcc[i] = mfcc_like_frontend(gen_audio).vectors;
    ref_mfcc[i] = mfcc_like_frontend(ref_audio).vectors;
  }
  report.exact_match_rate = static_cast<double>(exact) / n_eval;
  report.novelty = novelty / n_eval;
  auto stack = [](const std::vector<Mat>& parts) {
    Eigen::Index rows_total = 0;
    for (const auto& p : parts) rows_total += p.rows();
    Mat out(rows_total, parts.front().cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      out.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    return out;
  };
  report.fd_mfcc = frechet_distance(fit_gaussian(stack(gen_mfcc)), fit_gaussian(stack(ref_mfcc)));

  // Planted-match selection: the true beats-like features hidden among
  // decoys taken from other test examples.
  const int n_test = static_cast<int>(test_set.size());
  const int cands = std::min(config.eval.selection_candidates, n_test);
  int hits = 0;
  for (int i = 0; i < n_eval; ++i) {
    std::vector<Mat> candidates;
    const int planted = i % cands;
    for (int j = 0, decoy = 1; j < cands; ++j) {
      if (j == planted) {
        candidates.push_back(test_set[i].beats);
      } else {
        candidates.push_back(test_set[(i + decoy) % n_test].beats);
        ++decoy;
      }
    }
    hits += select_best(scav, ckpt.scav_params, test_set[i].bundle.streams.at(0).features, candidates, threads) ==
            planted;
  }
  report.selection_hit_rate = static_cast<double>(hits) / n_eval;
  return report;
}

}  // namespace maskgrid
