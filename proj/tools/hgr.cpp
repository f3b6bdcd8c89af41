#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hgr/harness.hpp"
#include "hgr/seqnet/gradcheck.hpp"
#include "hgr/synth.hpp"

namespace fs = std::filesystem;
using namespace hgr;

namespace {

std::vector<SkeletonSequence> read_sequences(const fs::path& in) {
  const fs::path dir = fs::is_directory(in / "sequences") ? in / "sequences" : in;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".skel") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .skel files in " + dir.string());
  std::vector<SkeletonSequence> out;
  for (const auto& f : files) out.push_back(read_sequence_file(f));
  return out;
}

bool is_ensemble_file(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line.rfind("hgr-ensemble", 0) == 0;
}

std::vector<Recognizer> load_recognizers(const fs::path& p) {
  if (is_ensemble_file(p)) return Ensemble::load(p).members;
  return {Recognizer::load(p)};
}

struct SynthArgs {
  std::string out;
  std::size_t sequences = 40;
  std::vector<std::size_t> gestures{4};
  std::vector<std::string> classes;
  double noise = 0.4;
  std::uint64_t seed = 1;
  std::string prefix = "synth";
  bool no_rotations = false;
};

struct TrainArgs {
  std::string method = "tsgr";
  std::string data;
  std::string out;
  std::uint64_t seed = 1;
  // recognizers
  std::size_t epochs = 30;
  double lr = 2e-4;
  std::size_t batch = 10;
  std::size_t chunk = 256;
  std::size_t validation = 6;
  std::size_t patience = 8;
  std::vector<std::size_t> widths;
  std::string recipe = "positions60";
  std::string loss = "focal";
  double gamma = 1.0;
  std::size_t members = 1;
  double subset = 0.8;
  double jitter = 0.0;
  std::string templates;
  // baseline
  double reg = 1e-3;
  std::size_t svm_epochs = 40;
  double svm_lr = 0.05;
  double straddle = 0.75;
};

struct DetectArgs {
  std::string method = "fsm";
  std::string in;
  std::string model;
  std::string templates;
  std::string out;
  std::size_t baseline_stride = kDefaultDetectionStride;
  std::size_t buffer = 10;
  std::size_t confirm = 5;
  std::size_t probation = 10;
  std::size_t end_confirm = 25;
  std::size_t window = 40;
  std::size_t stride = 10;
  double alpha = 0.5;
  double beta = 0.5;
  double lambda = 0.5;
  std::optional<double> epsilon;
};

struct EvalArgs {
  std::string gt;
  std::string pred;
  std::string data;
  std::string out;
  std::string name = "run";
};

struct GridArgs {
  std::string data;
  std::string model;
  std::string templates;
  std::string out;
  std::vector<double> alpha{0.5};
  std::vector<double> beta{0.5};
  std::vector<double> lambda{0.5};
  std::vector<double> epsilon;
  std::vector<std::size_t> stride{10};
  std::vector<std::size_t> window{40};
};

struct GradArgs {
  std::uint64_t seed = 1;
  std::size_t instances = 20;
  std::vector<std::string> stacks;
};

int run_synth(const SynthArgs& a) {
  synth::SynthConfig c;
  c.sequence_count = a.sequences;
  c.gestures_per_sequence = a.gestures;
  for (const auto& name : a.classes) c.classes.push_back(parse_label(name));
  c.noise_mm = a.noise;
  c.seed = a.seed;
  c.id_prefix = a.prefix;
  c.rotations = !a.no_rotations;
  const Dataset d = synth::synth_generate(c);
  const fs::path out(a.out);
  fs::create_directories(out / "sequences");
  save_dataset(d, out / "sequences", out / "annotations.txt");
  std::cout << "wrote " << d.sequences.size() << " sequences and " << d.annotations.size() << " annotations to "
            << out.string() << '\n';
  return 0;
}

int run_train(const TrainArgs& a) {
  const Dataset data = NativeImporter().import(a.data);
  const Method m = parse_method(a.method);
  if (m == Method::Baseline) {
    DictionaryConfig dc;
    dc.seed = a.seed;
    dc.straddle_fraction = a.straddle;
    SvmTrainConfig sc;
    sc.seed = a.seed;
    sc.reg = a.reg;
    sc.epochs = a.svm_epochs;
    sc.lr = a.svm_lr;
    train_baseline(data, dc, sc).save(a.out);
    std::cout << "baseline model written to " << a.out << '\n';
    return 0;
  }
  if (m != Method::UDeepGRU && m != Method::TSGR) throw Error("train supports baseline, udeepgru and tsgr");
  RecognizerConfig rc;
  rc.kind = m == Method::UDeepGRU ? RecognizerKind::UDeepGRU : RecognizerKind::TSGR;
  rc.recipe = parse_recipe(a.recipe);
  rc.widths = a.widths;
  rc.loss = seqnet::parse_loss(a.loss);
  rc.focal_gamma = a.gamma;
  rc.seed = a.seed;
  TrainProtocol p;
  p.lr = a.lr;
  p.batch = a.batch;
  p.max_chunk = a.chunk;
  p.validation_sequences = a.validation;
  p.epochs = a.epochs;
  p.patience = a.patience;
  p.seed = a.seed;
  p.jitter_mm = a.jitter;
  auto progress = [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << " validation F1 " << e.validation_f1 << '\n';
  };
  if (a.members > 1) {
    train_ensemble(rc, p, data, a.members, a.subset, progress).save(fs::path(a.out));
  } else {
    const Recognizer r = train_recognizer(rc, p, data, progress);
    std::cerr << "best epoch " << r.best_epoch << " (F1 " << r.best_f1 << ")\n";
    r.save(fs::path(a.out));
  }
  if (!a.templates.empty()) build_templates(data).save(a.templates);
  std::cout << recognizer_name(rc.kind) << " model written to " << a.out << '\n';
  return 0;
}

int run_detect(const DetectArgs& a) {
  const auto sequences = read_sequences(a.in);
  const Method m = parse_method(a.method);
  PipelineRun run;
  if (m == Method::Baseline) {
    run = run_baseline(BaselineModel::load(a.model), sequences, {a.baseline_stride, 0.0});
  } else {
    const auto members = load_recognizers(a.model);
    if (m == Method::UDeepGRU || m == Method::TSGR) {
      run = members.size() == 1 ? run_argmax(members.front(), sequences) : run_argmax(members, sequences);
    } else if (m == Method::Fsm) {
      FsmConfig fc;
      fc.buffer_size = a.buffer;
      fc.confirm_threshold = a.confirm;
      fc.probation_windows = a.probation;
      fc.end_confirm = a.end_confirm;
      run = members.size() == 1 ? run_fsm(members.front(), sequences, fc) : run_fsm(members, sequences, fc);
    } else {
      if (members.size() != 1) throw Error("the energy pipeline takes a single recognizer");
      std::optional<ClassTemplates> templates;
      if (!a.templates.empty()) templates = ClassTemplates::load(a.templates);
      EnergyPipelineConfig ec;
      ec.window_length = a.window;
      ec.stride = a.stride;
      ec.lambda = a.lambda;
      ec.filter.alpha = a.alpha;
      ec.filter.beta = a.beta;
      ec.filter.epsilon = a.epsilon;
      run = run_energy(recognizer_segment_classifier(members.front()), templates ? &*templates : nullptr, sequences,
                       ec);
    }
  }
  write_spans(run.events, a.out);
  std::cout << run.events.size() << " events written to " << a.out << " in " << run.total_seconds << " s\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  const auto sequences = read_sequences(a.data);
  const auto gt = read_spans(a.gt, sequences);
  const auto pred = read_spans(a.pred, sequences);
  MetricsReport r = match_and_score(gt, pred, sequences);
  r.name = a.name;
  if (!a.out.empty()) write_report(r, a.out);
  const MetricsReport reports[] = {r};
  std::cout << summary_table(reports);
  return 0;
}

int run_grid(const GridArgs& a) {
  const Dataset data = NativeImporter().import(a.data);
  const Recognizer r = Recognizer::load(fs::path(a.model));
  std::optional<ClassTemplates> templates;
  if (!a.templates.empty()) templates = ClassTemplates::load(a.templates);
  GridSpec spec;
  spec.alpha = a.alpha;
  spec.beta = a.beta;
  spec.lambda = a.lambda;
  if (!a.epsilon.empty()) spec.epsilon.assign(a.epsilon.begin(), a.epsilon.end());
  spec.stride = a.stride;
  spec.window_length = a.window;
  const auto result = grid_search(spec, data, recognizer_segment_classifier(r), templates ? &*templates : nullptr);
  const auto csv = grid_table_csv(result);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw Error("cannot write " + a.out);
    out << csv;
  }
  const auto& b = result.best;
  std::cout << "best mean Jaccard " << result.best_score << " at L=" << b.window_length << " stride=" << b.stride
            << " epsilon=" << (b.epsilon ? std::to_string(*b.epsilon) : std::string("auto")) << " lambda=" << b.lambda
            << " alpha=" << b.alpha << " beta=" << b.beta << '\n';
  return 0;
}

int run_gradcheck(const GradArgs& a) {
  std::vector<seqnet::CheckedStack> stacks;
  for (const auto& s : a.stacks) stacks.push_back(seqnet::parse_checked_stack(s));
  if (stacks.empty()) stacks.assign(seqnet::kCheckedStacks.begin(), seqnet::kCheckedStacks.end());
  double worst = 0.0;
  for (auto s : stacks) {
    seqnet::GradCheckResult agg;
    for (std::size_t i = 0; i < a.instances; ++i) {
      const auto r = seqnet::check_instance(seqnet::make_grad_check_instance(s, a.seed + i));
      if (r.max_relative_error >= agg.max_relative_error) {
        agg.max_relative_error = r.max_relative_error;
        agg.worst_parameter = r.worst_parameter;
      }
      agg.checked += r.checked;
      agg.skipped += r.skipped;
    }
    worst = std::max(worst, agg.max_relative_error);
    std::cout << seqnet::checked_stack_name(s) << ": max relative error " << agg.max_relative_error << " at "
              << agg.worst_parameter << " (" << agg.checked << " checked, " << agg.skipped << " at kinks)\n";
  }
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand gesture detection toolkit"};
  app.set_config("--config", "", "key=value configuration file; sections name subcommands");
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--sequences", sa.sequences, "Number of sequences");
  synth->add_option("--gestures", sa.gestures, "Gestures per sequence, drawn per sequence");
  synth->add_option("--classes", sa.classes, "Class names to include (default all)");
  synth->add_option("--noise", sa.noise, "Jitter standard deviation in mm");
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--prefix", sa.prefix, "Sequence id prefix");
  synth->add_flag("--no-rotations", sa.no_rotations, "Omit joint rotations");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a detector");
  train->add_option("--method", ta.method, "baseline, udeepgru or tsgr")->required();
  train->add_option("--data", ta.data, "Dataset directory (sequences/ and annotations.txt)")->required();
  train->add_option("--out", ta.out, "Model path (a directory for the baseline)")->required();
  train->add_option("--seed", ta.seed, "Random seed");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--lr", ta.lr);
  train->add_option("--batch", ta.batch);
  train->add_option("--chunk", ta.chunk, "Maximum training chunk length in frames");
  train->add_option("--validation", ta.validation, "Sequences withheld for model selection");
  train->add_option("--patience", ta.patience, "Epochs without improvement before stopping; 0 disables");
  train->add_option("--widths", ta.widths, "Layer widths");
  train->add_option("--recipe", ta.recipe, "positions60, pos_speed_accel or pos_quat140");
  train->add_option("--loss", ta.loss, "focal or cross_entropy");
  train->add_option("--gamma", ta.gamma, "Focal loss gamma");
  train->add_option("--members", ta.members, "Ensemble size");
  train->add_option("--subset", ta.subset, "Fraction of sequences per ensemble member");
  train->add_option("--jitter", ta.jitter, "Training position jitter in mm");
  train->add_option("--templates", ta.templates, "Also write trajectory templates to this file");
  train->add_option("--reg", ta.reg, "SVM L2 regularisation");
  train->add_option("--svm-epochs", ta.svm_epochs);
  train->add_option("--svm-lr", ta.svm_lr);
  train->add_option("--straddle", ta.straddle, "Share of non-gesture crops that touch a gesture");

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Detect gestures in sequences");
  detect->add_option("--method", da.method, "baseline, udeepgru, tsgr, fsm or energy")->required();
  detect->add_option("--in", da.in, "Directory of .skel files")->required();
  detect->add_option("--model", da.model, "Trained model")->required();
  detect->add_option("--out", da.out, "Detections file")->required();
  detect->add_option("--templates", da.templates, "Trajectory templates for the energy method");
  detect->add_option("--baseline-stride", da.baseline_stride);
  detect->add_option("--buffer", da.buffer, "State machine window size");
  detect->add_option("--confirm", da.confirm);
  detect->add_option("--probation", da.probation);
  detect->add_option("--end-confirm", da.end_confirm);
  detect->add_option("--window", da.window, "Energy window length L");
  detect->add_option("--stride", da.stride, "Energy window stride");
  detect->add_option("--alpha", da.alpha);
  detect->add_option("--beta", da.beta);
  detect->add_option("--lambda", da.lambda);
  detect->add_option("--epsilon", da.epsilon);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score detections against annotations");
  eval->add_option("--gt", ea.gt, "Annotation file")->required();
  eval->add_option("--pred", ea.pred, "Detections file")->required();
  eval->add_option("--data", ea.data, "Directory of the scored .skel files")->required();
  eval->add_option("--out", ea.out, "Report path stem (writes .csv and .json)");
  eval->add_option("--name", ea.name, "Run name in the report");

  GridArgs ga;
  auto* grid = app.add_subcommand("gridsearch", "Tune the energy pipeline on validation data");
  grid->add_option("--data", ga.data, "Validation dataset directory")->required();
  grid->add_option("--model", ga.model, "Recognizer used as segment classifier")->required();
  grid->add_option("--templates", ga.templates);
  grid->add_option("--out", ga.out, "CSV score table");
  grid->add_option("--alpha", ga.alpha);
  grid->add_option("--beta", ga.beta);
  grid->add_option("--lambda", ga.lambda);
  grid->add_option("--epsilon", ga.epsilon, "Candidate thresholds (default: per-sequence)");
  grid->add_option("--stride", ga.stride);
  grid->add_option("--window", ga.window);

  GradArgs gr;
  auto* grad = app.add_subcommand("gradcheck", "Verify analytic gradients by finite differences");
  grad->add_option("--seed", gr.seed);
  grad->add_option("--instances", gr.instances, "Random instances per layer stack");
  grad->add_option("--stack", gr.stacks, "dense, gru, shift, batch_norm or focal");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return run_synth(sa);
    if (*train) return run_train(ta);
    if (*detect) return run_detect(da);
    if (*eval) return run_eval(ea);
    if (*grid) return run_grid(ga);
    if (*grad) return run_gradcheck(gr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
