// vfunnel: build attention-guided multi-scale crop portfolios from
// (image, attention dump) pairs.
//
//   vfunnel generate --image img.png --attn dump.json --out dir/ [options]
//   vfunnel batch    --list pairs.json --out dir/ [--jobs N] [options]
//   vfunnel sweep    --image img.png --attn dump.json --sweep static,default,k0 [--out t.csv]
//   vfunnel validate --attn dump.json

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vfunnel/vfunnel.hpp"

namespace {

using namespace vfunnel;

void report_error(const char *kind, const std::string &message) {
  nlohmann::ordered_json line;
  line["error"] = kind;
  line["message"] = message;
  std::cerr << line.dump() << std::endl;
}

struct CommonOptions {
  std::string config_file;
  std::string out;
  std::int64_t resolution = 0;
  std::size_t levels = 0;
  std::vector<std::string> beta;
  std::vector<std::string> gamma;
  std::string mode;
  bool overlay = false;
  int precision = 0;
  double window_side = 0.0;
  double max_iou = 0.0;

  CLI::Option *o_out = nullptr;
  CLI::Option *o_resolution = nullptr;
  CLI::Option *o_levels = nullptr;
  CLI::Option *o_mode = nullptr;
  CLI::Option *o_overlay = nullptr;
  CLI::Option *o_precision = nullptr;
  CLI::Option *o_window = nullptr;
  CLI::Option *o_iou = nullptr;

  void attach(CLI::App *cmd) {
    cmd->add_option("--config", config_file, "JSON run configuration; flags override it")
        ->check(CLI::ExistingFile);
    o_out = cmd->add_option("--out", out, "Output location");
    o_resolution = cmd->add_option("--resolution,-S", resolution, "Model input resolution S");
    o_levels = cmd->add_option("--levels,-K", levels, "Portfolio size K");
    cmd->add_option("--beta", beta, "Base expansion factor override, LEVEL=VALUE");
    cmd->add_option("--gamma", gamma, "Entropy sensitivity override, LEVEL=VALUE");
    o_mode = cmd->add_option("--mode", mode, "funnel | static | topk:N");
    o_overlay = cmd->add_flag("--overlay", overlay, "Also write overlay.png");
    o_precision = cmd->add_option("--precision", precision, "Decimals for real numbers");
    o_window = cmd->add_option("--window-side", window_side, "Top-K window side (default S)");
    o_iou = cmd->add_option("--max-iou", max_iou, "Top-K overlap tolerance (default 0)");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) {
      load_config_file(cfg, config_file);
    }
    if (o_out->count() > 0) {
      cfg.out = out;
    }
    if (o_resolution->count() > 0) {
      cfg.resolution = resolution;
    }
    if (o_levels->count() > 0) {
      cfg.levels = levels;
    }
    for (const auto &b : beta) {
      const auto [k, v] = parse_level_assignment(b);
      cfg.overrides.beta[k] = v;
    }
    for (const auto &g : gamma) {
      const auto [k, v] = parse_level_assignment(g);
      cfg.overrides.gamma[k] = v;
    }
    if (o_mode->count() > 0) {
      cfg.mode = parse_mode(mode);
    }
    if (o_overlay->count() > 0) {
      cfg.overlay = overlay;
    }
    if (o_precision->count() > 0) {
      cfg.precision = precision;
    }
    if (o_window->count() > 0) {
      cfg.window_side = window_side;
    }
    if (o_iou->count() > 0) {
      cfg.max_iou = max_iou;
    }
    cfg.validate();
    return cfg;
  }
};

int cmd_generate(const std::string &image, const std::string &attn, const CommonOptions &opts) {
  const RunConfig cfg = opts.resolve();
  const GenerateResult r = generate_portfolio(image, attn, cfg);
  std::cout << "wrote " << r.crops << " crops to " << r.out.string()
            << " (h_norm=" << format_fixed(r.h_norm, cfg.precision) << ")\n";
  return 0;
}

int cmd_batch(const std::string &listing, unsigned jobs, const CommonOptions &opts) {
  const RunConfig cfg = opts.resolve();
  const auto pairs = load_listing(listing);
  const BatchSummary s = run_batch(pairs, cfg, jobs);
  for (std::size_t k = 0; k < s.outcomes.size(); ++k) {
    if (!s.outcomes[k].ok) {
      report_error("pair_failed", s.outcomes[k].name + ": " + s.outcomes[k].error);
    }
  }
  std::cout << s.succeeded() << " ok, " << s.failed() << " failed of " << s.count() << "\n";
  return s.exit_code();
}

int cmd_sweep(const std::string &image, const std::string &attn,
              const std::vector<std::string> &labels, const CommonOptions &opts) {
  const RunConfig cfg = opts.resolve();
  const auto rows = run_sweep(image, attn, labels, cfg.resolution);
  const std::string csv = render_sweep_csv(rows, cfg.precision);
  if (cfg.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(cfg.out, std::ios::binary);
    f << csv;
    if (!f) {
      throw std::runtime_error("failed to write " + cfg.out.string());
    }
  }
  return 0;
}

int cmd_validate(const std::string &attn) {
  std::ifstream in(attn);
  if (!in) {
    report_error("unreadable", "cannot open " + attn);
    return 1;
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error &e) {
    report_error("invalid_json", e.what());
    return 1;
  }
  const DumpReport report = validate_dump(doc);
  nlohmann::ordered_json out;
  out["file"] = attn;
  out["valid"] = report.ok();
  out["violations"] = report.violations;
  std::cout << out.dump(2) << "\n";
  return report.ok() ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Attention-guided multi-scale crop portfolios"};
  app.require_subcommand(1);

  std::string image;
  std::string attn;
  std::string listing;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> labels;

  CommonOptions gen_opts;
  auto *gen = app.add_subcommand("generate", "Build one portfolio directory");
  gen->add_option("--image", image, "Input image (PNG or JPEG)")->required()->check(CLI::ExistingFile);
  gen->add_option("--attn", attn, "Attention dump JSON")->required()->check(CLI::ExistingFile);
  gen_opts.attach(gen);

  CommonOptions batch_opts;
  auto *batch = app.add_subcommand("batch", "Build portfolios for every pair in a listing");
  batch->add_option("--list", listing, "Listing JSON of {image, attn, name?} pairs")->required();
  batch->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);
  batch_opts.attach(batch);

  CommonOptions sweep_opts;
  auto *sweep = app.add_subcommand("sweep", "Compare portfolio geometry across configurations");
  sweep->add_option("--image", image, "Input image (PNG or JPEG)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--attn", attn, "Attention dump JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--sweep", labels,
                    "Configurations: static, weak, default, strong, beta-0.2, beta+0.2, "
                    "k0..k4, custom:K:b1:g1:...")
      ->required()
      ->delimiter(',');
  sweep_opts.attach(sweep);

  auto *validate = app.add_subcommand("validate", "Check an attention dump against the schema");
  validate->add_option("--attn", attn, "Attention dump JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(image, attn, gen_opts);
    }
    if (batch->parsed()) {
      return cmd_batch(listing, jobs, batch_opts);
    }
    if (sweep->parsed()) {
      return cmd_sweep(image, attn, labels, sweep_opts);
    }
    if (validate->parsed()) {
      return cmd_validate(attn);
    }
  } catch (const InvalidInput &e) {
    report_error("invalid_input", e.what());
    return 1;
  } catch (const std::exception &e) {
    report_error("failure", e.what());
    return 1;
  }
  return 1;
}
