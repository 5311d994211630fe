// Command-line front end: generate, perturb, train, sweep, metrics, plot.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bkgnn/bundle.hpp"
#include "bkgnn/config.hpp"
#include "bkgnn/experiment.hpp"
#include "bkgnn/graph.hpp"
#include "bkgnn/io.hpp"
#include "bkgnn/models.hpp"
#include "bkgnn/nn/checkpoint.hpp"
#include "bkgnn/perturb.hpp"
#include "bkgnn/synth.hpp"

namespace fs = std::filesystem;
using namespace bkgnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

struct GenerateArgs {
  SynthParams params;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  a.params.validate();
  const auto ds = generate_dataset(a.params);
  write_bundle(a.out, ds);
  const double omega = overlap_coefficient(a.params.delta_xi, a.params.omega, a.params.alpha);
  std::printf("wrote %s: %zu samples, %zu nodes, %zu edges\n", a.out.c_str(), ds.sample_count(),
              ds.feature_count(), ds.graph.edge_count());
  std::printf("Omega ≈ %.3f\n", omega);
  return kExitOk;
}

struct PerturbArgs {
  std::string graph, descriptor, clusters, out, clusters_out;
  std::uint64_t seed = 0;
};

int cmd_perturb(const PerturbArgs& a) {
  const auto p = parse_perturbation(a.descriptor, a.seed);
  const auto g = read_edge_list(fs::path(a.graph));
  std::vector<NodeSet> clusters;
  if (!a.clusters.empty()) clusters = read_clusters(fs::path(a.clusters));
  const auto result = apply_perturbation(g, p, a.clusters.empty() ? nullptr : &clusters);
  write_edge_list(fs::path(a.out), result.graph);
  write_text(a.out + ".provenance.json", provenance_to_json(result.provenance).dump(2) + "\n");
  if (!a.clusters_out.empty()) write_clusters(fs::path(a.clusters_out), result.clusters);
  std::printf("%s: %zu -> %zu edges\n", result.provenance.descriptor.c_str(), g.edge_count(),
              result.graph.edge_count());
  return kExitOk;
}

struct TrainArgs {
  std::string bundle, config, graph, clusters, out;
};

int cmd_train(const TrainArgs& a) {
  const auto cfg = train_config_from_json(parse_json_file(a.config));
  auto ds = read_bundle(a.bundle);
  if (!a.graph.empty()) ds.graph = read_edge_list(fs::path(a.graph));
  if (!a.clusters.empty()) ds.clusters = read_clusters(fs::path(a.clusters));
  const auto split = make_split(ds.labels, std::max(2, ds.class_count()), cfg.split);
  auto trained = train(cfg.model, ds, split, &ds.graph, &ds.clusters);
  const double train_acc = evaluate(trained, ds.features, ds.labels, split.train);
  const double test_acc = evaluate(trained, ds.features, ds.labels, split.test);

  ensure_dir(a.out);
  nn::write_checkpoint(fs::path(a.out) / "model.ckpt", trained.model->state());
  std::ostringstream loss;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < trained.loss_history.size(); ++e)
    loss << e + 1 << ',' << format_double(trained.loss_history[e]) << '\n';
  write_text(fs::path(a.out) / "loss.csv", loss.str());
  nlohmann::ordered_json summary;
  summary["model"] = model_spec_to_json(cfg.model);
  summary["train_size"] = split.train.size();
  summary["test_size"] = split.test.size();
  summary["parameters"] = trained.model->parameter_count();
  summary["train_accuracy"] = train_acc;
  summary["test_accuracy"] = test_acc;
  write_text(fs::path(a.out) / "summary.json", summary.dump(2) + "\n");
  std::printf("%s: train accuracy %.4f, test accuracy %.4f\n", cfg.model.label().c_str(), train_acc, test_acc);
  return kExitOk;
}

struct SweepArgs {
  std::string config, out;
  unsigned workers = 1;
};

int cmd_sweep(const SweepArgs& a) {
  auto cfg = sweep_config_from_json(parse_json_file(a.config), fs::path(a.config).parent_path());
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.workers < 1) throw Error(Errc::InvalidParam, "--workers must be >= 1");
  const auto result = run_sweep(cfg, a.workers);
  const auto rows = aggregate(result);

  ensure_dir(cfg.output_dir);
  std::ostringstream results, aggregates;
  write_results_csv(results, result);
  write_aggregates_csv(aggregates, rows);
  write_text(cfg.output_dir / "results.csv", results.str());
  write_text(cfg.output_dir / "aggregates.csv", aggregates.str());
  emit_curves(rows, cfg.output_dir / "curve.svg");

  nlohmann::ordered_json prov;
  prov["perturbations"] = nlohmann::ordered_json::array();
  for (const auto& c : result.perturbations)
    prov["perturbations"].push_back({{"run", c.run},
                                     {"kappa", c.kappa},
                                     {"descriptor", c.descriptor},
                                     {"edges", c.edges},
                                     {"removed", c.removed},
                                     {"added", c.added},
                                     {"selected_nodes", c.selected}});
  prov["shared_models"] = nlohmann::ordered_json::array();
  for (const auto& m : cfg.models)
    if (!is_informed(m.kind)) prov["shared_models"].push_back(m.label());
  write_text(cfg.output_dir / "provenance.json", prov.dump(2) + "\n");

  std::size_t failed = 0;
  for (const auto& r : result.records) failed += r.status != "ok";
  std::printf("%zu records (%zu failed) written to %s\n", result.records.size(), failed,
              cfg.output_dir.string().c_str());
  return kExitOk;
}

struct MetricsArgs {
  std::string graph, clusters;
  std::size_t k = 1;
};

int cmd_metrics(const MetricsArgs& a) {
  if (a.k < 1) throw Error(Errc::InvalidParam, "--k must be >= 1");
  const auto g = read_edge_list(fs::path(a.graph));
  const auto clusters = read_clusters(fs::path(a.clusters));
  std::printf("cluster,aspl,mean_rf_%zu\n", a.k);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].empty()) continue;
    std::printf("%zu,%s,%s\n", c, format_double(cluster_aspl(g, clusters[c])).c_str(),
                format_double(mean_receptive_field(g, clusters[c], a.k)).c_str());
  }
  return kExitOk;
}

struct PlotArgs {
  std::string input, out;
};

int cmd_plot(const PlotArgs& a) {
  auto in = open_in(a.input);
  std::string header;
  std::getline(in, header);
  in.seekg(0);
  std::vector<AggregateRow> rows;
  if (trim_cr(header) == kResultsHeader) rows = aggregate(read_results_csv(in));
  else rows = read_aggregates_csv(in);
  emit_curves(rows, a.out);
  std::printf("wrote %s\n", a.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bkgnn: background-knowledge graphs, GNN training and perturbation sweeps"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset bundle and print its overlap Omega");
  generate->add_option("-C,--clusters", gen.params.clusters, "number of clusters (= classes)")->capture_default_str();
  generate->add_option("-M,--nodes-per-cluster", gen.params.nodes_per_cluster, "nodes per cluster")
      ->capture_default_str();
  generate->add_option("-N,--samples-per-class", gen.params.samples_per_class, "samples per class")
      ->capture_default_str();
  generate->add_option("--delta-xi", gen.params.delta_xi, "location gap between active and inactive laws")
      ->capture_default_str();
  generate->add_option("--omega", gen.params.omega, "skew-normal scale")->capture_default_str();
  generate->add_option("--alpha", gen.params.alpha, "skew-normal shape")->capture_default_str();
  generate->add_option("--seed", gen.params.seed, "master seed")->capture_default_str();
  generate->add_option("-o,--out", gen.out, "bundle directory")->required();

  PerturbArgs per;
  auto* perturb = app.add_subcommand("perturb", "Apply one perturbation to an edge-list graph");
  perturb->add_option("-g,--graph", per.graph, "input edge list (TSV)")->required();
  perturb->add_option("-p,--perturbation", per.descriptor, "descriptor kind:kappa[:variant][:seed]")->required();
  perturb->add_option("-c,--clusters", per.clusters, "cluster file (node<TAB>cluster)");
  perturb->add_option("--seed", per.seed, "seed used when the descriptor has none")->capture_default_str();
  perturb->add_option("-o,--out", per.out, "output edge list; provenance goes to <out>.provenance.json")
      ->required();
  perturb->add_option("--clusters-out", per.clusters_out, "write the (possibly rewired) cluster file here");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model on a dataset bundle");
  train_cmd->add_option("-b,--bundle", tr.bundle, "dataset bundle directory")->required();
  train_cmd->add_option("--config", tr.config, "training config (JSON: model + split)")->required();
  train_cmd->add_option("-g,--graph", tr.graph, "edge list replacing the bundle graph");
  train_cmd->add_option("-c,--clusters", tr.clusters, "cluster file replacing the bundle clusters");
  train_cmd->add_option("-o,--out", tr.out, "output directory (model.ckpt, loss.csv, summary.json)")->required();

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run a kappa sweep and write results, aggregates and a chart");
  sweep->add_option("--config", sw.config, "sweep config (JSON)")->required();
  sweep->add_option("-w,--workers", sw.workers, "worker threads")->capture_default_str();
  sweep->add_option("-o,--out", sw.out, "output directory (overrides the config)");

  MetricsArgs me;
  auto* metrics = app.add_subcommand("metrics", "Print per-cluster ASPL and mean k-hop receptive field as CSV");
  metrics->add_option("-g,--graph", me.graph, "edge list (TSV)")->required();
  metrics->add_option("-c,--clusters", me.clusters, "cluster file")->required();
  metrics->add_option("-k,--k", me.k, "hop count")->capture_default_str();

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "Render an SVG accuracy-vs-kappa chart");
  plot->add_option("-i,--input", pl.input, "aggregates.csv or results.csv")->required();
  plot->add_option("-o,--out", pl.out, "output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen);
    if (perturb->parsed()) return cmd_perturb(per);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (sweep->parsed()) return cmd_sweep(sw);
    if (metrics->parsed()) return cmd_metrics(me);
    if (plot->parsed()) return cmd_plot(pl);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == Errc::IoError ? kExitIo : kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
