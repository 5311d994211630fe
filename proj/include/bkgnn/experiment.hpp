#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "bkgnn/bundle.hpp"
#include "bkgnn/io.hpp"
#include "bkgnn/models.hpp"
#include "bkgnn/perturb.hpp"
#include "bkgnn/rng.hpp"
#include "bkgnn/synth.hpp"

namespace bkgnn {

struct SweepConfig {
  std::optional<SynthParams> synthetic = SynthParams{};
  std::optional<std::filesystem::path> bundle;  // used instead of `synthetic` when set
  bool freeze_dataset = false;                  // keep the synthetic seed fixed across runs
  std::vector<ModelSpec> models;
  PerturbKind perturbation = PerturbKind::RemoveEdges;
  Variant variant = Variant::None;
  std::vector<double> kappas{0.0};
  int runs = 10;
  std::uint64_t master_seed = 0;
  SplitPlan split;
  std::filesystem::path output_dir = "sweep-out";

  void validate() const {
    if (!synthetic && !bundle) throw Error(Errc::InvalidParam, "sweep needs a synthetic or bundle dataset");
    if (synthetic) synthetic->validate();
    if (models.empty()) throw Error(Errc::InvalidParam, "sweep needs at least one model");
    for (const auto& m : models) m.validate();
    for (std::size_t i = 0; i < models.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (models[i].label() == models[j].label())
          throw Error(Errc::InvalidParam, "duplicate model name '" + models[i].label() + "'");
    if (runs < 1) throw Error(Errc::InvalidParam, "runs must be >= 1");
    if (kappas.empty() || kappas.front() != 0.0)
      throw Error(Errc::InvalidParam, "kappa grid must start at 0");
    if (!std::is_sorted(kappas.begin(), kappas.end()) ||
        std::adjacent_find(kappas.begin(), kappas.end()) != kappas.end())
      throw Error(Errc::InvalidParam, "kappa grid must be strictly ascending");
    Perturbation{perturbation, kappas.back(), variant, 0}.validate();
    if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0))
      throw Error(Errc::InvalidParam, "test_fraction must lie in (0, 1)");
  }
};

struct SweepRecord {
  std::string model;
  std::string perturbation;
  std::string variant;
  double kappa = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  std::string split;  // "train" or "test"
  std::string status = "ok";
  std::optional<double> accuracy;
  bool shared = false;  // replicated from the kappa = 0 training of an uninformed model
  std::size_t model_index = 0;
  std::size_t kappa_index = 0;
};

struct CellProvenance {
  int run = 0;
  double kappa = 0.0;
  std::string descriptor;
  std::size_t edges = 0;
  std::size_t removed = 0;
  std::size_t added = 0;
  std::size_t selected = 0;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  std::vector<CellProvenance> perturbations;
};

/// Stream tags under the master seed.
struct SweepSeeds {
  static std::uint64_t dataset(std::uint64_t master, int run) {
    return derive_seed({master, hash_tag("dataset"), static_cast<std::uint64_t>(run)});
  }
  static std::uint64_t split(std::uint64_t master, int run) {
    return derive_seed({master, hash_tag("split"), static_cast<std::uint64_t>(run)});
  }
  static std::uint64_t perturbation(std::uint64_t master, int run, std::size_t kappa_index) {
    return derive_seed({master, hash_tag("perturb"), static_cast<std::uint64_t>(run), kappa_index});
  }
  static std::uint64_t model(std::uint64_t master, int run, std::size_t kappa_index, std::size_t model_index) {
    return derive_seed({master, static_cast<std::uint64_t>(run), kappa_index, model_index});
  }
};

/// Runs jobs 0..count-1 on up to `workers` threads. The first exception is
/// rethrown after all threads have joined.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

inline void sort_records(std::vector<SweepRecord>& records) {
  std::sort(records.begin(), records.end(), [](const SweepRecord& a, const SweepRecord& b) {
    if (a.model_index != b.model_index) return a.model_index < b.model_index;
    if (a.kappa_index != b.kappa_index) return a.kappa_index < b.kappa_index;
    if (a.run != b.run) return a.run < b.run;
    return a.split == "train" && b.split != "train";
  });
}

inline SweepResult run_sweep(const SweepConfig& cfg, unsigned workers = 1) {
  cfg.validate();
  const std::size_t runs = static_cast<std::size_t>(cfg.runs);
  const std::size_t nk = cfg.kappas.size();
  const std::size_t nm = cfg.models.size();

  // Datasets and splits, one per run.
  std::optional<SynthDataset> loaded;
  if (cfg.bundle) loaded = read_bundle(*cfg.bundle);
  std::vector<SynthDataset> datasets(loaded ? 0 : runs);
  std::vector<Split> splits(runs);
  parallel_for(runs, workers, [&](std::size_t r) {
    const int run = static_cast<int>(r);
    if (!loaded) {
      SynthParams p = *cfg.synthetic;
      if (!cfg.freeze_dataset) p.seed = SweepSeeds::dataset(cfg.master_seed, run);
      datasets[r] = generate_dataset(p);
    }
    const SynthDataset& ds = loaded ? *loaded : datasets[r];
    SplitPlan plan = cfg.split;
    plan.seed = SweepSeeds::split(cfg.master_seed, run);
    splits[r] = make_split(ds.labels, std::max(2, ds.class_count()), plan);
  });
  auto dataset = [&](std::size_t r) -> const SynthDataset& { return loaded ? *loaded : datasets[r]; };

  // Perturbed graphs, one per (run, kappa).
  std::vector<PerturbResult> graphs(runs * nk);
  parallel_for(runs * nk, workers, [&](std::size_t cell) {
    const std::size_t r = cell / nk, k = cell % nk;
    const Perturbation p{cfg.perturbation, cfg.kappas[k], cfg.variant,
                         SweepSeeds::perturbation(cfg.master_seed, static_cast<int>(r), k)};
    graphs[cell] = apply_perturbation(dataset(r).graph, p, &dataset(r).clusters);
  });

  // Training cells. Uninformed models only train at kappa index 0.
  struct Cell {
    std::size_t run, kappa, model;
  };
  std::vector<Cell> cells;
  for (std::size_t m = 0; m < nm; ++m)
    for (std::size_t k = 0; k < nk; ++k) {
      if (k > 0 && !is_informed(cfg.models[m].kind)) continue;
      for (std::size_t r = 0; r < runs; ++r) cells.push_back({r, k, m});
    }
  struct Outcome {
    std::uint64_t seed = 0;
    bool ok = false;
    double train = 0.0, test = 0.0;
  };
  std::vector<Outcome> outcomes(cells.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    const Cell& c = cells[i];
    const auto& ds = dataset(c.run);
    const auto& pg = graphs[c.run * nk + c.kappa];
    ModelSpec spec = cfg.models[c.model];
    spec.seed = SweepSeeds::model(cfg.master_seed, static_cast<int>(c.run), c.kappa, c.model);
    Outcome& out = outcomes[i];
    out.seed = spec.seed;
    try {
      auto trained = train(spec, ds, splits[c.run], &pg.graph, &pg.clusters);
      out.train = evaluate(trained, ds.features, ds.labels, splits[c.run].train);
      out.test = evaluate(trained, ds.features, ds.labels, splits[c.run].test);
      out.ok = true;
    } catch (const Error& e) {
      if (e.code() != Errc::TrainingDiverged) throw;
    }
  });

  SweepResult result;
  const std::string kind(kind_name(cfg.perturbation));
  const std::string variant(cfg.variant == Variant::None ? "" : variant_name(cfg.variant));
  auto emit = [&](const Cell& c, const Outcome& o, std::size_t kappa_index, bool shared) {
    for (const char* which : {"train", "test"}) {
      SweepRecord rec;
      rec.model = cfg.models[c.model].label();
      rec.perturbation = kind;
      rec.variant = variant;
      rec.kappa = cfg.kappas[kappa_index];
      rec.run = static_cast<int>(c.run);
      rec.seed = o.seed;
      rec.split = which;
      rec.status = o.ok ? "ok" : "failed";
      if (o.ok) rec.accuracy = std::string_view(which) == "train" ? o.train : o.test;
      rec.shared = shared;
      rec.model_index = c.model;
      rec.kappa_index = kappa_index;
      result.records.push_back(std::move(rec));
    }
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    emit(c, outcomes[i], c.kappa, false);
    if (!is_informed(cfg.models[c.model].kind))
      for (std::size_t k = 1; k < nk; ++k) emit(c, outcomes[i], k, true);
  }
  sort_records(result.records);

  for (std::size_t r = 0; r < runs; ++r)
    for (std::size_t k = 0; k < nk; ++k) {
      const auto& pg = graphs[r * nk + k];
      result.perturbations.push_back({static_cast<int>(r), cfg.kappas[k], pg.provenance.descriptor,
                                      pg.graph.edge_count(), pg.provenance.removed_edges.size(),
                                      pg.provenance.added_edges.size(), pg.provenance.selected_nodes.size()});
    }
  return result;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kResultsHeader = "model,perturbation,variant,kappa,run,seed,split,status,accuracy";
inline constexpr const char* kAggregatesHeader = "model,perturbation,variant,kappa,n,mean,ci95";

inline void write_results_csv(std::ostream& out, const SweepResult& result) {
  out << kResultsHeader << '\n';
  for (const auto& r : result.records) {
    out << r.model << ',' << r.perturbation << ',' << r.variant << ',' << format_double(r.kappa) << ','
        << r.run << ',' << r.seed << ',' << r.split << ',' << r.status << ','
        << (r.accuracy ? format_double(*r.accuracy) : "") << '\n';
  }
}

inline std::vector<SweepRecord> read_results_csv(std::istream& in) {
  std::string raw;
  if (!std::getline(in, raw) || trim_cr(raw) != kResultsHeader)
    throw Error(Errc::ParseError, "results CSV: unexpected header");
  std::vector<SweepRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = "results CSV line " + std::to_string(line_no);
    if (f.size() != 9) throw Error(Errc::ParseError, where + ": expected 9 fields");
    SweepRecord r;
    r.model = f[0];
    r.perturbation = f[1];
    r.variant = f[2];
    r.kappa = parse_double(f[3], where);
    r.run = parse_int<int>(f[4], where);
    r.seed = parse_int<std::uint64_t>(f[5], where);
    r.split = f[6];
    r.status = f[7];
    if (!f[8].empty()) r.accuracy = parse_double(f[8], where);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct AggregateRow {
  std::string model;
  std::string perturbation;
  std::string variant;
  double kappa = 0.0;
  std::size_t n = 0;       // successful runs
  std::size_t failed = 0;  // diverged runs
  double mean = 0.0;
  double ci95 = 0.0;
};

/// Two-sided 95% Student-t half-width t_{0.975, n-1} s / sqrt(n); 0 for n < 2.
inline double ci95_half_width(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
}

/// One row per (model, perturbation, variant, kappa) over the records of
/// `split`, in order of first appearance. Failed runs are excluded from the
/// statistics and counted separately.
inline std::vector<AggregateRow> aggregate(std::span<const SweepRecord> records, std::string_view split = "test") {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<double>> values;
  std::map<std::tuple<std::string, std::string, std::string, double>, std::size_t> index;
  for (const auto& r : records) {
    if (r.split != split) continue;
    auto key = std::make_tuple(r.model, r.perturbation, r.variant, r.kappa);
    auto [it, fresh] = index.try_emplace(key, rows.size());
    if (fresh) {
      rows.push_back({r.model, r.perturbation, r.variant, r.kappa});
      values.emplace_back();
    }
    if (r.accuracy && r.status == "ok") values[it->second].push_back(*r.accuracy);
    else ++rows[it->second].failed;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = values[i];
    rows[i].n = v.size();
    if (v.empty()) continue;
    double s = 0.0;
    for (double x : v) s += x;
    rows[i].mean = s / static_cast<double>(v.size());
    rows[i].ci95 = ci95_half_width(v);
  }
  return rows;
}

inline std::vector<AggregateRow> aggregate(const SweepResult& result, std::string_view split = "test") {
  return aggregate(result.records, split);
}

inline void write_aggregates_csv(std::ostream& out, std::span<const AggregateRow> rows) {
  out << kAggregatesHeader << '\n';
  for (const auto& r : rows) {
    out << r.model << ',' << r.perturbation << ',' << r.variant << ',' << format_double(r.kappa) << ',' << r.n
        << ',';
    if (r.n > 0) out << format_double(r.mean) << ',' << format_double(r.ci95);
    else out << ',';
    out << '\n';
  }
}

inline std::vector<AggregateRow> read_aggregates_csv(std::istream& in) {
  std::string raw;
  if (!std::getline(in, raw) || trim_cr(raw) != kAggregatesHeader)
    throw Error(Errc::ParseError, "aggregates CSV: unexpected header");
  std::vector<AggregateRow> out;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim_cr(raw);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = "aggregates CSV line " + std::to_string(line_no);
    if (f.size() != 7) throw Error(Errc::ParseError, where + ": expected 7 fields");
    AggregateRow r;
    r.model = f[0];
    r.perturbation = f[1];
    r.variant = f[2];
    r.kappa = parse_double(f[3], where);
    r.n = parse_int<std::size_t>(f[4], where);
    if (r.n > 0) {
      r.mean = parse_double(f[5], where);
      r.ci95 = parse_double(f[6], where);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG line chart
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Accuracy-vs-kappa chart: one polyline per series with a shaded CI band
/// and a point marker at every kappa.
inline std::string render_curves(std::span<const AggregateRow> rows) {
  if (rows.empty()) throw Error(Errc::EmptyInput, "no aggregates to plot");
  using detail::fixed;
  constexpr double W = 720, H = 440, left = 70, right = 190, top = 30, bottom = 60;
  constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                     "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const double pw = W - left - right, ph = H - top - bottom;

  std::vector<std::string> series;
  std::map<std::string, std::vector<const AggregateRow*>> points;
  std::vector<double> ks;
  std::vector<std::string> kinds;
  for (const auto& r : rows) {
    std::string label = r.model;
    auto& list = points[label];
    if (list.empty()) series.push_back(label);
    if (r.n > 0) list.push_back(&r);
    ks.push_back(r.kappa);
    if (std::find(kinds.begin(), kinds.end(), r.perturbation) == kinds.end()) kinds.push_back(r.perturbation);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const double kmin = ks.front(), kmax = ks.back();
  auto sx = [&](double k) { return kmax > kmin ? left + (k - kmin) / (kmax - kmin) * pw : left + pw / 2; };
  auto sy = [&](double a) { return top + (1.0 - std::clamp(a, 0.0, 1.0)) * ph; };

  std::string kind_label;
  for (const auto& k : kinds) kind_label += (kind_label.empty() ? "" : ", ") + k;

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double a = t / 5.0, y = sy(a);
    s << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(left + pw) << "\" y2=\""
      << fixed(y) << "\" stroke=\"#dddddd\"/>\n"
      << "<text x=\"" << fixed(left - 8) << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">" << fixed(a, 1)
      << "</text>\n";
  }
  for (double k : ks)
    s << "<text x=\"" << fixed(sx(k)) << "\" y=\"" << fixed(top + ph + 18) << "\" text-anchor=\"middle\">"
      << format_double(k) << "</text>\n";
  s << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(pw) << "\" height=\""
    << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(H - 15)
    << "\" text-anchor=\"middle\">kappa (" << detail::xml_escape(kind_label) << ")</text>\n"
    << "<text x=\"18\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << fixed(top + ph / 2) << ")\">accuracy</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % std::size(palette)];
    auto pts = points[series[i]];
    std::stable_sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->kappa < b->kappa; });
    s << "<g id=\"series-" << i << "\">\n";
    if (pts.size() > 1) {
      s << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (auto* p : pts) s << fixed(sx(p->kappa)) << ',' << fixed(sy(p->mean + p->ci95)) << ' ';
      for (auto it = pts.rbegin(); it != pts.rend(); ++it)
        s << fixed(sx((*it)->kappa)) << ',' << fixed(sy((*it)->mean - (*it)->ci95)) << ' ';
      s << "\"/>\n<polyline class=\"curve\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t j = 0; j < pts.size(); ++j)
        s << (j ? " " : "") << fixed(sx(pts[j]->kappa)) << ',' << fixed(sy(pts[j]->mean));
      s << "\"/>\n";
    }
    for (auto* p : pts)
      s << "<circle class=\"marker\" cx=\"" << fixed(sx(p->kappa)) << "\" cy=\"" << fixed(sy(p->mean))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(i);
    s << "<line x1=\"" << fixed(left + pw + 15) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(left + pw + 40)
      << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << fixed(left + pw + 46) << "\" y=\"" << fixed(ly + 4) << "\">"
      << detail::xml_escape(series[i]) << "</text>\n</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void emit_curves(std::span<const AggregateRow> rows, const std::filesystem::path& path) {
  const std::string svg = render_curves(rows);
  auto out = open_out(path);
  out << svg;
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

}  // namespace bkgnn
