// calmap: meal-image calorie estimation via per-pixel energy density maps.
//
// Subcommands cover the whole experiment pipeline: synthetic benchmark
// generation, ground-truth density map emission, conditional-GAN encoder
// training, regression decoder training, evaluation, and report formatting.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "calmap/calmap.hpp"

namespace fs = std::filesystem;
using namespace calmap;

namespace {

std::string device_from_env() {
  const char* env = std::getenv("CALMAP_DEVICE");
  if (env == nullptr || *env == '\0') return "cpu";
  return env;
}

void check_device(const std::string& device) {
  const torch::Device dev(device);
  if (dev.is_cuda() && !torch::cuda::is_available()) {
    throw std::runtime_error("CALMAP_DEVICE requests '" + device +
                             "' but CUDA is not available in this build");
  }
}

struct SynthArgs {
  std::string out;
  int count = 200;
  int size = 64;
  std::uint64_t seed = 0;
  int min_items = 1;
  int max_items = 4;
  int attempts = 200;
};

int cmd_synth(const SynthArgs& args) {
  SyntheticSceneConfig cfg;
  cfg.scene_count = args.count;
  cfg.image_size = args.size;
  cfg.min_items = args.min_items;
  cfg.max_items = args.max_items;
  cfg.seed = derive_seed(args.seed, "synth");
  cfg.max_placement_attempts = args.attempts;
  const auto scenes = generate_synthetic(cfg);
  const fs::path manifest = save_manifest(args.out, scenes);
  std::cout << "wrote " << scenes.size() << " scenes to " << manifest.string() << "\n";
  return 0;
}

struct DensifyArgs {
  std::string manifest;
  std::string out;
  int size = 0;
  bool strict = false;
};

int cmd_densify(const DensifyArgs& args) {
  fs::create_directories(args.out);
  PrunePolicy policy;
  policy.target_size = args.size;
  const PruneResult result = prune(parse_manifest(args.manifest), policy);

  for (const EatingOccasion& occ : result.kept) {
    write_dmap(fs::path(args.out) / (occ.id + ".dmap"), occasion_density(occ));
  }

  nlohmann::ordered_json rejections = nlohmann::ordered_json::array();
  for (const PruneRejection& rej : result.rejected) {
    std::cerr << "warning: rejected occasion '" << rej.id << "': " << rej.reason << "\n";
    rejections.push_back({{"id", rej.id}, {"reason", rej.reason}});
  }
  std::ofstream(fs::path(args.out) / "rejections.json", std::ios::trunc)
      << rejections.dump(2) << '\n';

  std::cout << "wrote " << result.kept.size() << " density maps to " << args.out << " ("
            << result.rejected.size() << " rejected)\n";
  if (args.strict && !result.rejected.empty()) {
    std::cerr << "error: --strict and " << result.rejected.size() << " occasions rejected\n";
    return 1;
  }
  return 0;
}

struct TrainEncoderArgs {
  std::string manifest;
  std::string out;
  std::string loss_csv;
  std::uint64_t seed = 0;
  bool no_augment = false;
  EncoderConfig encoder;  // flag defaults mirror the published protocol
};

std::vector<EatingOccasion> augmented_training_partition(
    const std::vector<EatingOccasion>& occasions, const DatasetSplit& split, bool augment) {
  std::vector<EatingOccasion> train = select_occasions(occasions, split.train);
  if (!augment) return train;
  std::vector<EatingOccasion> expanded;
  expanded.reserve(train.size() * 4);
  for (const EatingOccasion& occ : train) {
    for (EatingOccasion& variant : augment_fourfold(occ)) {
      expanded.push_back(std::move(variant));
    }
  }
  return expanded;
}

int cmd_train_encoder(TrainEncoderArgs args) {
  check_device(args.encoder.device);
  const auto occasions = load_manifest(args.manifest, args.encoder.image_size);
  const DatasetSplit ds = split(occasions, derive_seed(args.seed, "split"));
  const auto train = augmented_training_partition(occasions, ds, !args.no_augment);

  args.encoder.seed = derive_seed(args.seed, "encoder");
  args.encoder.checkpoint_path = args.out;
  EncoderModel model = train_encoder(args.encoder, train);
  model.save(args.out);
  if (!args.loss_csv.empty()) export_loss_csv(model, args.loss_csv);

  double final_epoch_l1 = 0.0;
  int final_steps = 0;
  for (const LossRecord& rec : model.history()) {
    if (rec.epoch == model.epochs_completed()) {
      final_epoch_l1 += rec.loss_l1;
      ++final_steps;
    }
  }
  std::cout << "trained encoder on " << train.size() << " occasions for "
            << model.epochs_completed() << " epochs (K=" << model.k() << ")\n";
  if (final_steps > 0) {
    std::cout << "final epoch mean L1: " << final_epoch_l1 / final_steps << "\n";
  }
  std::cout << "checkpoint: " << args.out << "\n";
  return 0;
}

struct TrainDecoderArgs {
  std::string manifest;
  std::string encoder_path;
  std::string out;
  std::string loss_csv;
  std::string backbone = "resnet18";
  std::uint64_t seed = 0;
  RegressionDecoderConfig decoder;
};

int cmd_train_decoder(TrainDecoderArgs args) {
  check_device(args.decoder.device);
  EncoderModel encoder = EncoderModel::load(args.encoder_path);
  const auto occasions = load_manifest(args.manifest, encoder.config().image_size);
  const DatasetSplit ds = split(occasions, derive_seed(args.seed, "split"));

  args.decoder.backbone = decoder_kind_from_string(args.backbone);
  args.decoder.pretrained = !args.decoder.pretrained_weights.empty();
  args.decoder.seed = derive_seed(args.seed, "decoder");
  DecoderModel model = train_regression_decoder(args.decoder, encoder,
                                                select_occasions(occasions, ds.train),
                                                select_occasions(occasions, ds.val));
  model.save(args.out);
  if (!args.loss_csv.empty()) export_decoder_loss_csv(model, args.loss_csv);
  std::cout << "trained " << args.backbone << " decoder; best epoch " << model.best_epoch()
            << " of " << model.history().size() << "\n";
  std::cout << "checkpoint: " << args.out << "\n";
  return 0;
}

void print_reference_table(std::ostream& os) {
  os << "published reference targets (not reproducible here; the study dataset is private):\n";
  for (const ReferenceTarget& t : reference_targets()) {
    os << "  table " << t.table << "  " << t.method;
    if (t.pretrained.has_value()) os << (*t.pretrained ? " (pretrained)" : " (from scratch)");
    os << ": MAE " << t.mae_kcal << " kCal, MAPE " << t.mape_percent << "%\n";
  }
}

// eval drives the whole pipeline, so its arguments are the PipelineConfig plus
// the decoder-kind selector.
struct EvalArgs {
  PipelineConfig pipe;
  std::string decoder_kind = "summation";
  int runs = 0;  // 0 resolves to 1 with --encoder, 5 (the protocol default) otherwise
  bool no_augment = false;
};

EvaluationReport run_full_evaluation(const EvalArgs& args, const EncoderModel& encoder,
                                     const DecoderModel& decoder,
                                     const std::vector<EatingOccasion>& test,
                                     const std::string& descriptor, const std::string& stem,
                                     std::uint64_t seed) {
  DensityPredictor predictor = [&encoder](const EatingOccasion& occ) {
    return encoder.predict(occ.image);
  };
  CalorieEstimator estimator = [&decoder](const DensityMap& map) { return decoder.decode(map); };
  EvaluationReport report = evaluate(predictor, estimator, test, descriptor, seed);

  if (args.pipe.eval.figures) {
    const auto bins = error_histogram_bins(report);
    write_histogram_png(bins, args.pipe.output_dir / ("histogram_" + stem + ".png"));
    write_histogram_csv(bins, args.pipe.output_dir / ("histogram_" + stem + ".csv"));
    const ExtremeSelection extremes = select_extreme_instances(report, args.pipe.eval.panel_count);
    std::vector<std::string> panel_ids = extremes.over;
    panel_ids.insert(panel_ids.end(), extremes.under.begin(), extremes.under.end());
    for (const std::string& id : panel_ids) {
      const auto panel_occs = select_occasions(test, {id});
      const DensityMap predicted = encoder.predict(panel_occs[0].image);
      write_qualitative_panel_png(args.pipe.output_dir / ("panel_" + stem + "_" + id + ".png"),
                                  panel_occs[0], predicted, decoder.decode(predicted));
    }
  }
  return report;
}

int cmd_eval(EvalArgs args) {
  PipelineConfig& pipe = args.pipe;
  const DecoderKind kind = decoder_kind_from_string(args.decoder_kind);
  const bool fixed_encoder = !pipe.encoder_checkpoint.empty();
  if (args.runs == 0) args.runs = fixed_encoder ? 1 : 5;
  if (fixed_encoder && args.runs != 1) {
    throw CLI::ValidationError("--runs", "multi-run evaluation retrains per run; it cannot be "
                                         "combined with --encoder");
  }
  if (fixed_encoder && kind != DecoderKind::kSummation && pipe.decoder_checkpoint.empty()) {
    throw CLI::ValidationError("--decoder-checkpoint",
                               "a regression decoder checkpoint is required with --encoder");
  }
  check_device(pipe.encoder.device);
  fs::create_directories(pipe.output_dir);
  pipe.eval.runs = args.runs;
  pipe.dataset.image_size = fixed_encoder
                                ? EncoderModel::load(pipe.encoder_checkpoint).config().image_size
                                : pipe.encoder.image_size;
  pipe.dataset.augment_training = !args.no_augment;

  const auto occasions = load_manifest(pipe.manifest, pipe.dataset.image_size);
  const DatasetSplit ds =
      split(occasions, derive_seed(pipe.dataset.seed, "split"), pipe.dataset.ratios);
  const auto test = select_occasions(occasions, ds.test);

  if (fixed_encoder) {
    EncoderModel encoder = EncoderModel::load(pipe.encoder_checkpoint);
    DecoderModel decoder = kind == DecoderKind::kSummation
                               ? DecoderModel::summation()
                               : DecoderModel::load(pipe.decoder_checkpoint);
    const std::string descriptor =
        "encoder=" + pipe.encoder_checkpoint.string() + " decoder=" + to_string(decoder.kind());
    EvaluationReport report = run_full_evaluation(args, encoder, decoder, test, descriptor, "run0",
                                                  derive_seed(pipe.dataset.seed, "run", 0));
    write_report_json(report, pipe.output_dir / "report.json");
    write_report_csv(report, pipe.output_dir / "report.csv");
    std::cout << "MAE " << report.mae << " kCal, MAPE " << report.mape << "% over "
              << report.records.size() << " test occasions\n";
    print_reference_table(std::cout);
    return 0;
  }

  // per-run protocol: fixed split, re-seeded training
  const auto train_occasions =
      augmented_training_partition(occasions, ds, pipe.dataset.augment_training);
  const auto run_once = [&](int run_index, std::uint64_t run_seed) {
    EncoderConfig enc_cfg = pipe.encoder;
    enc_cfg.seed = derive_seed(run_seed, "encoder");
    EncoderModel encoder = train_encoder(enc_cfg, train_occasions);

    DecoderModel decoder = DecoderModel::summation();
    if (kind != DecoderKind::kSummation) {
      RegressionDecoderConfig dec_cfg = pipe.decoder;
      dec_cfg.backbone = kind;
      dec_cfg.seed = derive_seed(run_seed, "decoder");
      decoder = train_regression_decoder(dec_cfg, encoder, select_occasions(occasions, ds.train),
                                         select_occasions(occasions, ds.val));
    }
    const std::string descriptor =
        "encoder=trained(run " + std::to_string(run_index) + ") decoder=" + to_string(kind);
    EvaluationReport report = run_full_evaluation(args, encoder, decoder, test, descriptor,
                                                  "run" + std::to_string(run_index), run_seed);
    write_report_json(report,
                      pipe.output_dir / ("report_run" + std::to_string(run_index) + ".json"));
    write_report_csv(report,
                     pipe.output_dir / ("report_run" + std::to_string(run_index) + ".csv"));
    std::cout << "run " << run_index << ": MAE " << report.mae << " kCal, MAPE " << report.mape
              << "%\n";
    return report;
  };

  AggregateReport agg = aggregate(run_once, pipe.eval.runs, pipe.dataset.seed);
  write_aggregate_json(agg, pipe.output_dir / "aggregate.json");
  std::cout << "mean over " << agg.runs.size() << " runs: MAE " << agg.mean_mae << " kCal, MAPE "
            << agg.mean_mape << "%\n";
  print_reference_table(std::cout);
  return 0;
}

struct ReportArgs {
  std::string input;
  std::string out_dir;
};

int cmd_report(const ReportArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw ParseError("report: cannot open " + args.input);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("report: " + args.input + ": " + e.what());
  }

  std::vector<EvaluationReport> runs;
  if (doc.contains("runs")) {
    AggregateReport agg = read_aggregate_json(args.input);
    runs = agg.runs;
    std::cout << "aggregate of " << runs.size() << " runs: MAE " << agg.mean_mae
              << " kCal, MAPE " << agg.mean_mape << "%\n";
  } else {
    runs.push_back(read_report_json(args.input));
    std::cout << "report: MAE " << runs[0].mae << " kCal, MAPE " << runs[0].mape << "% ("
              << runs[0].pipeline << ")\n";
  }
  print_reference_table(std::cout);

  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto bins = error_histogram_bins(runs[i]);
      const std::string stem = "histogram_run" + std::to_string(i);
      write_histogram_png(bins, fs::path(args.out_dir) / (stem + ".png"));
      write_histogram_csv(bins, fs::path(args.out_dir) / (stem + ".csv"));
    }
    std::cout << "figures written to " << args.out_dir << "\n";
  }
  return 0;
}

void add_encoder_flags(CLI::App* cmd, EncoderConfig& cfg, std::uint64_t& seed) {
  cmd->add_option("--size", cfg.image_size, "Square image size (power of two)")
      ->capture_default_str();
  cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch-size", cfg.batch_size, "Batch size")->capture_default_str();
  cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--beta1", cfg.adam_beta1, "Adam beta1")->capture_default_str();
  cmd->add_option("--beta2", cfg.adam_beta2, "Adam beta2")->capture_default_str();
  cmd->add_option("--l1-weight", cfg.l1_weight, "Weight of the L1 reconstruction term")
      ->capture_default_str();
  cmd->add_option("--density-k", cfg.density_norm_k,
                  "Density normalization constant K (0 derives it from the training maps)")
      ->capture_default_str();
  cmd->add_option("--gen-channels", cfg.gen_base_channels, "Generator base channel count")
      ->capture_default_str();
  cmd->add_option("--disc-channels", cfg.disc_base_channels, "Discriminator base channel count")
      ->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "Intra-op threads (1 for deterministic runs)")
      ->capture_default_str();
  cmd->add_option("--checkpoint-interval", cfg.checkpoint_interval,
                  "Save the checkpoint every N epochs (0 saves only at the end)")
      ->capture_default_str();
  cmd->add_option("--seed", seed, "Master seed; per-component seeds derive from it")
      ->capture_default_str();
}

void add_decoder_flags(CLI::App* cmd, RegressionDecoderConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs, "Decoder training epochs")->capture_default_str();
  cmd->add_option("--patience", cfg.patience, "Early-stop patience in epochs")
      ->capture_default_str();
  cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch-size", cfg.batch_size, "Batch size")->capture_default_str();
  cmd->add_option("--base-width", cfg.base_width, "Backbone base channel width")
      ->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "Intra-op threads (1 for deterministic runs)")
      ->capture_default_str();
  cmd->add_option("--pretrained-weights", cfg.pretrained_weights,
                  "Decoder checkpoint with backbone weights to warm start from");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calmap: calorie estimation from meal images via energy density maps"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML config file; flags override file values");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
  synth_cmd->add_option("--n", synth_args.count, "Number of scenes")
      ->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--size", synth_args.size, "Scene image size in pixels")
      ->check(CLI::Range(16, 4096))->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.seed, "Master seed")->capture_default_str();
  synth_cmd->add_option("--min-items", synth_args.min_items, "Minimum items per scene")
      ->capture_default_str();
  synth_cmd->add_option("--max-items", synth_args.max_items, "Maximum items per scene")
      ->capture_default_str();
  synth_cmd->add_option("--attempts", synth_args.attempts, "Placement attempts per item")
      ->capture_default_str();

  DensifyArgs densify_args;
  auto* densify_cmd =
      app.add_subcommand("densify", "Write ground-truth density maps (DMAP v1) for a manifest");
  densify_cmd->add_option("--manifest", densify_args.manifest, "Manifest path")->required();
  densify_cmd->add_option("--out", densify_args.out, "Output directory")->required();
  densify_cmd->add_option("--size", densify_args.size,
                          "Regularize images to this size first (0 keeps native)")
      ->capture_default_str();
  densify_cmd->add_flag("--strict", densify_args.strict,
                        "Exit nonzero when any occasion is rejected");

  TrainEncoderArgs te_args;
  auto* te_cmd = app.add_subcommand("train-encoder",
                                    "Train the conditional-GAN image-to-density-map encoder");
  te_cmd->add_option("--manifest", te_args.manifest, "Manifest path")->required();
  te_cmd->add_option("--out", te_args.out, "Encoder checkpoint path")->required();
  te_cmd->add_option("--loss-csv", te_args.loss_csv, "Also export the loss history as CSV");
  te_cmd->add_flag("--no-augment", te_args.no_augment,
                   "Skip the four-fold flip augmentation of the training partition");
  add_encoder_flags(te_cmd, te_args.encoder, te_args.seed);

  TrainDecoderArgs td_args;
  auto* td_cmd =
      app.add_subcommand("train-decoder", "Train a regression decoder against a frozen encoder");
  td_cmd->add_option("--manifest", td_args.manifest, "Manifest path")->required();
  td_cmd->add_option("--encoder", td_args.encoder_path, "Frozen encoder checkpoint")->required();
  td_cmd->add_option("--out", td_args.out, "Decoder checkpoint path")->required();
  td_cmd->add_option("--backbone", td_args.backbone, "vgg16, resnet18, or resnet50")
      ->check(CLI::IsMember({"vgg16", "resnet18", "resnet50"}))->capture_default_str();
  td_cmd->add_option("--loss-csv", td_args.loss_csv, "Also export the loss history as CSV");
  td_cmd->add_option("--seed", td_args.seed, "Master seed")->capture_default_str();
  add_decoder_flags(td_cmd, td_args.decoder);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate MAE/MAPE on the test partition");
  eval_cmd->add_option("--manifest", eval_args.pipe.manifest, "Manifest path")->required();
  eval_cmd->add_option("--out", eval_args.pipe.output_dir,
                       "Output directory for reports and figures")->required();
  eval_cmd->add_option("--encoder", eval_args.pipe.encoder_checkpoint,
                       "Evaluate this encoder checkpoint instead of training");
  eval_cmd->add_option("--decoder", eval_args.decoder_kind,
                       "summation, vgg16, resnet18, or resnet50")
      ->check(CLI::IsMember({"summation", "vgg16", "resnet18", "resnet50"}))
      ->capture_default_str();
  eval_cmd->add_option("--decoder-checkpoint", eval_args.pipe.decoder_checkpoint,
                       "Regression decoder checkpoint (with --encoder)");
  eval_cmd->add_option("--runs", eval_args.runs,
                       "Training/evaluation runs to aggregate (default: 5, or 1 with --encoder)")
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_flag("--figures", eval_args.pipe.eval.figures,
                     "Emit histogram and qualitative panels");
  eval_cmd->add_option("--panels", eval_args.pipe.eval.panel_count,
                       "Extreme over/under estimates to render per side")
      ->capture_default_str();
  eval_cmd->add_flag("--no-augment", eval_args.no_augment,
                     "Skip four-fold augmentation when runs train their own encoder");
  add_encoder_flags(eval_cmd, eval_args.pipe.encoder, eval_args.pipe.dataset.seed);
  eval_cmd->add_option("--decoder-epochs", eval_args.pipe.decoder.epochs,
                       "Decoder epochs for multi-run training")
      ->capture_default_str();
  eval_cmd->add_option("--decoder-lr", eval_args.pipe.decoder.learning_rate,
                       "Decoder learning rate for multi-run training")
      ->capture_default_str();
  eval_cmd->add_option("--decoder-width", eval_args.pipe.decoder.base_width,
                       "Decoder backbone base width for multi-run training")
      ->capture_default_str();

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand(
      "report", "Format a report or aggregate against the published reference targets");
  report_cmd->add_option("--input", report_args.input, "report.json or aggregate.json")
      ->required();
  report_cmd->add_option("--out", report_args.out_dir, "Directory for histogram figures");

  for (CLI::App* sub : app.get_subcommands(nullptr)) {
    sub->fallthrough();  // lets --config after a subcommand reach the parent app
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string device = device_from_env();
  te_args.encoder.device = device;
  td_args.decoder.device = device;
  eval_args.pipe.encoder.device = device;
  eval_args.pipe.decoder.device = device;

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth_args);
    if (densify_cmd->parsed()) return cmd_densify(densify_args);
    if (te_cmd->parsed()) return cmd_train_encoder(te_args);
    if (td_cmd->parsed()) return cmd_train_decoder(td_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (report_cmd->parsed()) return cmd_report(report_args);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
