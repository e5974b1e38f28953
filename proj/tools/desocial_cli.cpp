#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "desocial/config.hpp"
#include "desocial/graph_store.hpp"
#include "desocial/harness.hpp"
#include "desocial/report.hpp"

using namespace desocial;

namespace {

ExperimentConfig configure(const std::string& path) {
  auto config = load_config(path);
  apply_environment(config);
  config.validate();
  return config;
}

void summarize(const RunBundle& bundle) {
  for (const auto& m : bundle.methods) {
    std::cout << m.name;
    for (const auto& [k, acc] : mean_accuracy(bundle, m.name)) std::cout << "  Acc@" << k << "=" << acc;
    std::cout << '\n';
  }
  std::cout << "output: " << bundle.config.output_dir << "  (" << bundle.seconds << " s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for user-validated distributed social recommendation"};
  app.require_subcommand(1);

  std::string edges_path, out_dir;
  auto* ingest = app.add_subcommand("ingest", "Remap an edge list to dense ids");
  ingest->add_option("edges", edges_path, "src dst timestamp records")->required();
  ingest->add_option("--out", out_dir, "output directory")->required();

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the full experiment");
  run->add_option("config", config_path)->required();

  std::string variant_name, backbone_name;
  auto* ablate = app.add_subcommand("ablate", "Run the pipeline next to one ablation variant");
  ablate->add_option("config", config_path)->required();
  ablate->add_option("--variant", variant_name,
                     "single | no_personalized | random_select | simple_select | no_consensus")
      ->required();
  ablate->add_option("--backbone", backbone_name, "backbone for single / no_personalized");

  auto* sweep = app.add_subcommand("sweep-pool", "Evaluate every subset of the backbone pool");
  sweep->add_option("config", config_path)->required();

  std::string n_list = "1,3,5,7,9";
  auto* gain = app.add_subcommand("gain-vs-n", "Consensus gain against committee size");
  gain->add_option("config", config_path)->required();
  gain->add_option("--n", n_list, "committee sizes")->capture_default_str();

  std::string spec_path, out_file;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic edge list");
  synth->add_option("spec", spec_path, "key = value synthetic description")->required();
  synth->add_option("--out", out_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*ingest) {
      auto result = ingest_edge_list_file(edges_path);
      std::filesystem::create_directories(out_dir);
      std::ostringstream edges;
      edges << "src dst timestamp\n";
      for (const auto& e : result.edges) edges << e.src << ' ' << e.dst << ' ' << e.timestamp << '\n';
      write_atomic(std::filesystem::path(out_dir) / "edges.txt", "# " + edges.str());
      std::ostringstream ids;
      write_id_map(result, ids);
      write_atomic(std::filesystem::path(out_dir) / "ids.csv", ids.str());
      std::cout << result.edges.size() << " edges, " << result.num_users() << " users, "
                << result.self_loops_dropped << " self-loops dropped\n";
    } else if (*synth) {
      std::ifstream in(spec_path);
      if (!in) throw Error("cannot open synthetic spec: " + spec_path);
      const auto spec = parse_synthetic_spec(in);
      std::ostringstream out;
      for (const auto& e : generate_synthetic_edges(spec)) out << e.src << ' ' << e.dst << ' ' << e.timestamp << '\n';
      write_atomic(out_file, out.str());
    } else {
      const auto config = configure(config_path);
      const auto data = load_dataset(config);
      RunBundle bundle;
      if (*run) {
        bundle = run_experiment(config, data);
      } else if (*ablate) {
        const auto variant = parse_variant(variant_name);
        if (!variant) throw Error("unknown variant '" + variant_name + "'");
        std::optional<BackboneKind> backbone;
        if (!backbone_name.empty()) {
          backbone = parse_backbone(backbone_name);
          if (!backbone) throw Error("unknown backbone '" + backbone_name + "'");
        }
        bundle = run_ablation(config, data, *variant, backbone);
      } else if (*sweep) {
        bundle = run_pool_sweep(config, data);
      } else {
        const auto sizes = parse_size_list(n_list);
        bundle = run_gain_vs_n(config, data, sizes);
      }
      emit_report(bundle, config.output_dir, &data);
      summarize(bundle);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
