// vrsa: command-line front end for dataset tooling, training, assessment and
// evaluation. Exit codes: 0 success, 1 usage, 2 data/validation, 3 numerical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "report_render.hpp"
#include "vrsa/checkpoint.hpp"
#include "vrsa/corpus.hpp"
#include "vrsa/errors.hpp"
#include "vrsa/evalkit.hpp"
#include "vrsa/ssq.hpp"
#include "vrsa/synth.hpp"
#include "vrsa/trainkit.hpp"

namespace fs = std::filesystem;
using namespace vrsa;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error while writing " + path.string());
}

/// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

fs::path base_dir_of(const std::string& manifest) { return fs::path(manifest).parent_path(); }

std::map<std::string, NormalizedScores> resolve_labels(const Manifest& manifest, const std::string& labels_path) {
  if (!labels_path.empty()) return read_labels_csv(labels_path);
  if (manifest.ratings.empty()) {
    throw ValidationError("no --labels given and the manifest has no ratings to derive them from");
  }
  return labels_from_ratings(manifest.ratings);
}

std::vector<std::string> split_ids(const Manifest& manifest, const std::string& split) {
  if (split.empty()) return {};
  const auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) throw ValidationError("manifest has no split '" + split + "'");
  return it->second;
}

RunConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  if (path.empty() && !seed) cfg.reseed(0);
  if (seed) cfg.reseed(*seed);
  return cfg;
}

json scores_json(const std::string& id, const PredictedScores& s) {
  return {{"clip_id", id},
          {"nausea", s.nausea},
          {"oculomotor", s.oculomotor},
          {"disorientation", s.disorientation},
          {"total", s.total}};
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string manifest;
  bool check_clips = false;
};

void run_ingest(const IngestArgs& a) {
  const auto m = load_manifest(a.manifest);
  json out;
  out["clips"] = m.clips.size();
  out["ratings"] = m.ratings.size();
  out["physio"] = m.physio.size();
  out["splits"] = json::object();
  for (const auto& [name, ids] : m.splits) out["splits"][name] = ids.size();
  if (a.check_clips) {
    for (const auto& c : m.clips) load_clip(c, base_dir_of(a.manifest));
    out["clips_checked"] = true;
  }
  json physio = json::array();
  for (const auto& p : m.physio) {
    const auto s = summarize_physio(p);
    physio.push_back({{"clip_id", p.clip_id},
                      {"subject_id", p.subject_id},
                      {"kind", to_string(p.kind)},
                      {"mean", s.mean},
                      {"std", s.std},
                      {"min", s.min},
                      {"max", s.max}});
  }
  out["physio_summary"] = physio;
  std::cout << out.dump(2) << "\n";
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  int n = 0;
  std::string out;
  std::uint64_t seed = 0;
  double omega_min = 0.0;
  double omega_max = 180.0;
  std::vector<double> fps;
  double duration = 1.0;
  int height = 32;
  int width = 128;
};

void run_synth(const SynthArgs& a) {
  SynthGrid grid;
  grid.omega = GridAxis::range(a.omega_min, a.omega_max);
  if (!a.fps.empty()) grid.fps = GridAxis::set(a.fps);
  grid.duration_s = a.duration;
  grid.height = a.height;
  grid.width = a.width;
  const auto corpus = generate_corpus(a.n, a.seed, grid, a.out);
  std::cerr << "wrote " << corpus.manifest.clips.size() << " clips to " << a.out << "\n";
}

// ---- score-ssq ------------------------------------------------------------

struct ScoreArgs {
  std::string ratings;
  std::string out;
  bool aggregate = false;
  bool normalize = false;
  double trim = 0.0;
};

void run_score(const ScoreArgs& a) {
  const auto records = read_ratings_csv(a.ratings);
  std::string text;
  auto row = [](double n, double o, double d, double t) {
    return num(n) + ',' + num(o) + ',' + num(d) + ',' + num(t) + '\n';
  };
  if (a.aggregate) {
    if (a.normalize) {
      text = format_labels_csv(labels_from_ratings(records, a.trim));
    } else {
      std::map<std::string, std::vector<SSQRecord>> by_clip;
      for (const auto& r : records) by_clip[r.clip_id].push_back(r);
      text = "clip_id,nausea,oculomotor,disorientation,total\n";
      for (const auto& [id, recs] : by_clip) {
        const auto s = aggregate_subjects(recs, a.trim);
        text += id + ',' + row(s.nausea, s.oculomotor, s.disorientation, s.total);
      }
    }
  } else {
    if (a.trim != 0.0) throw ValidationError("--trim only applies with --aggregate");
    text = "clip_id,subject_id,nausea,oculomotor,disorientation,total\n";
    for (const auto& r : records) {
      const auto s = score_ssq(r);
      text += r.clip_id + ',' + r.subject_id + ',';
      if (a.normalize) {
        const auto n = normalize_scores(s);
        text += row(n.nausea, n.oculomotor, n.disorientation, n.total);
      } else {
        text += row(s.nausea, s.oculomotor, s.disorientation, s.total);
      }
    }
  }
  emit(a.out, text);
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string labels;
  std::string config;
  std::string out;
  std::string split;
  std::string curves;
  std::optional<std::uint64_t> seed;
};

void run_train(const TrainArgs& a) {
  const auto manifest = load_manifest(a.manifest);
  const auto labels = resolve_labels(manifest, a.labels);
  const auto cfg = resolve_config(a.config, a.seed);
  const auto ids = split_ids(manifest, a.split);
  const auto samples = load_samples(manifest, labels, cfg.encoder, base_dir_of(a.manifest), ids);
  const auto result = run_pipeline(samples, cfg);
  save_model(result.model, a.out);

  std::cerr << "store: " << result.comfortable_count << " comfortable clips, loss "
            << num(result.store_loss.front()) << " -> " << num(result.store_loss.back()) << "\n";
  std::cerr << "predictor: " << samples.size() << " clips, loss " << num(result.predictor_loss.front())
            << " -> " << num(result.predictor_loss.back()) << "\n";
  if (!a.curves.empty()) {
    json curves = {{"store", result.store_loss}, {"predictor", result.predictor_loss}};
    write_text(a.curves, curves.dump(2) + "\n");
  }
  std::cout << checkpoint_digest(model_to_params(result.model)) << "\n";
}

// ---- assess ---------------------------------------------------------------

struct AssessArgs {
  std::string checkpoint;
  std::string clip;
  double fps = 0.0;
  std::string id = "clip";
  std::string manifest;
  std::string split;
  std::string out;
};

void run_assess(const AssessArgs& a) {
  const auto model = load_model(a.checkpoint);
  if (!a.clip.empty()) {
    const auto clip = load_clip_file(a.clip, a.fps, a.id);
    emit(a.out, scores_json(a.id, assess(clip, model)).dump(2) + "\n");
    return;
  }
  const auto manifest = load_manifest(a.manifest);
  auto ids = split_ids(manifest, a.split);
  if (ids.empty()) ids = manifest.clip_ids();
  std::map<std::string, PredictedScores> predictions;
  for (const auto& id : ids) {
    predictions[id] = assess(load_clip(manifest.clip(id), base_dir_of(a.manifest)), model);
  }
  emit(a.out, format_predictions_csv(predictions));
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string pred;
  std::string labels;
  std::string checkpoint;
  std::string out;
  std::string csv;
  bool logistic = false;
};

void run_evaluate(const EvaluateArgs& a) {
  EvalOptions opt;
  opt.logistic = a.logistic;
  if (!a.checkpoint.empty()) opt.config_digest = checkpoint_digest(load_checkpoint(a.checkpoint));
  const auto report = evaluate_run(read_predictions_csv(a.pred), read_labels_csv(a.labels), opt);
  emit(a.out, report_to_json(report));
  if (!a.csv.empty()) {
    std::vector<EvalReport> reports{report};
    write_text(a.csv, reports_to_csv(reports));
  }
}

// ---- crossval -------------------------------------------------------------

struct CrossvalArgs {
  std::string manifest;
  std::string labels;
  std::string config;
  int k = 5;
  std::optional<std::uint64_t> seed;
  bool logistic = false;
  std::string out;
  std::string csv;
};

void run_crossval(const CrossvalArgs& a) {
  const auto manifest = load_manifest(a.manifest);
  const auto labels = resolve_labels(manifest, a.labels);
  const auto cfg = resolve_config(a.config, a.seed);
  EvalOptions opt;
  opt.logistic = a.logistic;
  const auto cv = cross_validate(manifest, labels, a.k, cfg, base_dir_of(a.manifest), opt);
  emit(a.out, crossval_to_json(cv));
  if (!a.csv.empty()) write_text(a.csv, reports_to_csv(cv.folds));
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::string input;
  std::string pred;
  std::string labels;
  std::string out;
};

std::vector<EvalReport> load_reports(const std::string& path) {
  const auto text = read_text(path);
  if (fs::path(path).extension() == ".csv") return reports_from_csv(text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.contains("folds")) return crossval_from_json(text).folds;
  return {report_from_json(text)};
}

void run_report(const ReportArgs& a) {
  if (a.input.empty() && (a.pred.empty() || a.labels.empty())) {
    throw ValidationError("report needs --input, or --pred together with --labels");
  }
  std::vector<std::string> written;
  if (!a.input.empty()) {
    const auto reports = load_reports(a.input);
    const auto path = fs::path(a.out) / "metrics.svg";
    write_text(path, report::metrics_table_svg(reports));
    written.push_back(path.string());
  }
  if (!a.pred.empty() && !a.labels.empty()) {
    const auto path = fs::path(a.out) / "scatter.svg";
    write_text(path, report::scatter_svg(read_predictions_csv(a.pred), read_labels_csv(a.labels)));
    written.push_back(path.string());
  }
  for (const auto& p : written) std::cout << p << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predicts VR-sickness physical symptoms (nausea, oculomotor, disorientation) from 360 video."};
  app.require_subcommand(1);
  std::function<void()> action;

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a manifest and summarize its contents");
  c_ingest->add_option("--manifest", ingest.manifest, "Manifest JSON")->required();
  c_ingest->add_flag("--check-clips", ingest.check_clips, "Also load and check every clip");
  c_ingest->callback([&] { action = [&] { run_ingest(ingest); }; });

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus with analytic labels");
  c_synth->add_option("--n", synth.n, "Number of clips")->required();
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  c_synth->add_option("--omega-min", synth.omega_min, "Lowest angular velocity (deg/s)")->capture_default_str();
  c_synth->add_option("--omega-max", synth.omega_max, "Highest angular velocity (deg/s)")->capture_default_str();
  c_synth->add_option("--fps", synth.fps, "Frame rates to draw from (default 15 20 24 30 40 48 60)");
  c_synth->add_option("--duration", synth.duration, "Clip duration (s)")->capture_default_str();
  c_synth->add_option("--height", synth.height, "Frame height")->capture_default_str();
  c_synth->add_option("--width", synth.width, "Frame width")->capture_default_str();
  c_synth->callback([&] { action = [&] { run_synth(synth); }; });

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score-ssq", "Score SSQ ratings");
  c_score->add_option("--ratings", score.ratings, "Ratings CSV")->required();
  c_score->add_option("--out", score.out, "Output CSV (default stdout)");
  c_score->add_flag("--aggregate", score.aggregate, "Average subjects per clip");
  c_score->add_flag("--normalize", score.normalize, "Rescale to [0,1]; with --aggregate writes a labels CSV");
  c_score->add_option("--trim", score.trim, "Trimmed-mean fraction for --aggregate")->capture_default_str();
  c_score->callback([&] { action = [&] { run_score(score); }; });

  TrainArgs train;
  std::uint64_t train_seed = 0;
  auto* c_train = app.add_subcommand("train", "Train store and predictor; writes one checkpoint");
  c_train->add_option("--manifest", train.manifest, "Manifest JSON")->required();
  c_train->add_option("--labels", train.labels, "Labels CSV (default: derived from manifest ratings)");
  c_train->add_option("--config", train.config, "RunConfig JSON");
  c_train->add_option("--out", train.out, "Checkpoint path")->required();
  c_train->add_option("--split", train.split, "Train only on this manifest split");
  c_train->add_option("--curves", train.curves, "Write loss curves JSON here");
  auto* train_seed_opt = c_train->add_option("--seed", train_seed, "Override the config seed");
  c_train->callback([&] {
    if (train_seed_opt->count()) train.seed = train_seed;
    action = [&] { run_train(train); };
  });

  AssessArgs assess_args;
  auto* c_assess = app.add_subcommand("assess", "Predict symptom scores for one clip or a manifest");
  c_assess->add_option("--checkpoint", assess_args.checkpoint, "Checkpoint")->required();
  auto* clip_opt = c_assess->add_option("--clip", assess_args.clip, "VCT1 file or PNG frame directory");
  auto* fps_opt = c_assess->add_option("--fps", assess_args.fps, "Frame rate of --clip");
  c_assess->add_option("--id", assess_args.id, "Clip id reported for --clip")->capture_default_str();
  auto* manifest_opt = c_assess->add_option("--manifest", assess_args.manifest, "Assess every clip of a manifest");
  c_assess->add_option("--split", assess_args.split, "Restrict --manifest to one split");
  c_assess->add_option("--out", assess_args.out, "Output file (default stdout)");
  clip_opt->excludes(manifest_opt);
  clip_opt->needs(fps_opt);
  c_assess->callback([&] {
    if (assess_args.clip.empty() && assess_args.manifest.empty()) {
      throw CLI::ValidationError("assess", "one of --clip or --manifest is required");
    }
    action = [&] { run_assess(assess_args); };
  });

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "PLCC/SROCC/RMSE of predictions against labels");
  c_eval->add_option("--pred", evaluate.pred, "Predictions CSV")->required();
  c_eval->add_option("--labels", evaluate.labels, "Labels CSV")->required();
  c_eval->add_option("--checkpoint", evaluate.checkpoint, "Checkpoint whose digest to record");
  c_eval->add_option("--out", evaluate.out, "Report JSON (default stdout)");
  c_eval->add_option("--csv", evaluate.csv, "Also write the CSV mirror here");
  c_eval->add_flag("--logistic", evaluate.logistic, "Fit a 4-parameter logistic before PLCC");
  c_eval->callback([&] { action = [&] { run_evaluate(evaluate); }; });

  CrossvalArgs crossval;
  std::uint64_t cv_seed = 0;
  auto* c_cv = app.add_subcommand("crossval", "k-fold train/evaluate over a manifest");
  c_cv->add_option("--manifest", crossval.manifest, "Manifest JSON")->required();
  c_cv->add_option("--labels", crossval.labels, "Labels CSV (default: derived from manifest ratings)");
  c_cv->add_option("--config", crossval.config, "RunConfig JSON");
  c_cv->add_option("--k", crossval.k, "Number of folds")->capture_default_str();
  auto* cv_seed_opt = c_cv->add_option("--seed", cv_seed, "Override the config seed");
  c_cv->add_flag("--logistic", crossval.logistic, "Fit a 4-parameter logistic before PLCC");
  c_cv->add_option("--out", crossval.out, "Cross-validation JSON (default stdout)");
  c_cv->add_option("--csv", crossval.csv, "Also write the CSV mirror here");
  c_cv->callback([&] {
    if (cv_seed_opt->count()) crossval.seed = cv_seed;
    action = [&] { run_crossval(crossval); };
  });

  ReportArgs report_args;
  auto* c_report = app.add_subcommand("report", "Render report tables and scatter plots as SVG");
  c_report->add_option("--input", report_args.input, "Report JSON, cross-validation JSON or report CSV");
  c_report->add_option("--pred", report_args.pred, "Predictions CSV for the scatter plot");
  c_report->add_option("--labels", report_args.labels, "Labels CSV for the scatter plot");
  c_report->add_option("--out", report_args.out, "Output directory")->required();
  c_report->callback([&] { action = [&] { run_report(report_args); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    action();
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
