#include "dtj/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <iostream>

#include <CLI11.hpp>

#include "dtj/engine.hpp"
#include "dtj/io.hpp"
#include "dtj/oracle.hpp"

namespace dtj {

namespace {

std::filesystem::path default_workdir() {
  if (const char* env = std::getenv("DTJ_WORKDIR")) return env;
  return ".dtj-work";
}

struct ParamFlags {
  double eps_sp = 0.0;
  double eps_t = 0.0;
  double delta_t = 0.0;
  bool minutes = false;

  void attach(CLI::App* cmd, bool required = true) {
    auto* a = cmd->add_option("--eps-sp", eps_sp, "spatial threshold (dataset length units)");
    auto* b = cmd->add_option("--eps-t", eps_t, "temporal tolerance (seconds)");
    auto* c = cmd->add_option("--delta-t", delta_t, "minimum match duration (seconds)");
    cmd->add_flag("--minutes", minutes, "interpret --eps-t/--delta-t (and temporal sweeps) in minutes");
    if (required) {
      a->required();
      b->required();
      c->required();
    }
  }
  JoinParams resolve() const {
    const double scale = minutes ? 60.0 : 1.0;
    return JoinParams{eps_sp, eps_t * scale, delta_t * scale};
  }
};

int diff_and_report(const std::vector<std::string>& oracle_lines,
                    const std::vector<std::string>& pipeline_lines, const std::string& algo) {
  if (oracle_lines == pipeline_lines) {
    std::cout << "verify " << algo << ": OK (" << oracle_lines.size() << " pairs)\n";
    return 0;
  }
  std::cout << "verify " << algo << ": MISMATCH (oracle " << oracle_lines.size() << " pairs, "
            << algo << " " << pipeline_lines.size() << " pairs)\n";
  std::size_t shown = 0;
  for (const auto& l : oracle_lines) {
    if (!std::binary_search(pipeline_lines.begin(), pipeline_lines.end(), l) && shown < 10) {
      std::cout << "  missing: " << l << '\n';
      ++shown;
    }
  }
  for (const auto& l : pipeline_lines) {
    if (!std::binary_search(oracle_lines.begin(), oracle_lines.end(), l) && shown < 20) {
      std::cout << "  extra:   " << l << '\n';
      ++shown;
    }
  }
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"subtrajectory join engine"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  GenSpec spec;
  std::string gen_out;
  gen->add_option("--out", gen_out, "output CSV path")->required();
  gen->add_option("--n-traj", spec.n_traj, "number of trajectories");
  gen->add_option("--points", spec.points_per_traj, "points per trajectory");
  gen->add_option("--duration", spec.duration, "time range length (seconds)");
  gen->add_option("--area", spec.area, "square side of the spatial extent");
  gen->add_option("--skew", spec.skew,
                  "temporal skew s: ceil(s*points) of each trajectory lands in the first (1-s) "
                  "of the range; 0.5 = uniform");
  gen->add_option("--group-size", spec.group_size, "co-moving group size (1 = independent)");
  gen->add_option("--group-span", spec.group_span_frac, "co-moving fraction of the duration");
  gen->add_option("--eps-sp", spec.eps_sp, "group members stay within eps-sp/2 of a shared path");
  gen->add_option("--seed", spec.seed, "RNG seed");

  // --- repartition ---------------------------------------------------------
  auto* rep = app.add_subcommand("repartition",
                                 "equi-depth repartitioning preprocessing (run once per dataset)");
  std::string rep_data;
  std::filesystem::path rep_workdir = default_workdir();
  PreprocessConfig pre;
  bool rate_given = false;
  rep->add_option("--data", rep_data, "input dataset CSV")->required();
  rep->add_option("--workdir", rep_workdir, "output directory (env DTJ_WORKDIR overrides default)");
  rep->add_option("--blocks", pre.m, "number of partition files M");
  rep->add_option("--block-size", pre.block_size_bytes, "derive M from this block size in bytes");
  rep->add_option("--sample-rate", pre.sample_rate, "sampling fraction (default 1% with a 10k floor)")
      ->check(CLI::Range(1e-9, 1.0))
      ->each([&](const std::string&) { rate_given = true; });
  rep->add_option("--quadtree-threshold", pre.quadtree_threshold_pct,
                  "build a QuadTree; max points per cell as % of the population");
  rep->add_option("--nodes", pre.nodes, "node count for collocation grouping (k = ceil(M/nodes))");
  rep->add_option("--seed", pre.seed, "sampling seed");

  // --- join ----------------------------------------------------------------
  auto* join = app.add_subcommand("join", "run a subtrajectory join pipeline");
  std::string join_algo, join_data, join_out, join_metrics, join_tasks_csv;
  std::filesystem::path join_workdir = default_workdir();
  ParamFlags join_params;
  int join_workers = 4;
  int join_parts = 8;
  join->add_option("--algo", join_algo, "dtjb|dtjr|dtji")->required();
  join->add_option("--data", join_data, "dataset CSV (required for dtjb)");
  join->add_option("--workdir", join_workdir, "preprocessed workdir (dtjr/dtji) or spill dir (dtjb)");
  join_params.attach(join);
  join->add_option("--workers", join_workers, "parallel worker count");
  join->add_option("--parts", join_parts, "uniform partition count (dtjb)");
  join->add_option("--out", join_out, "results CSV path");
  join->add_option("--metrics", join_metrics, "metrics report path");
  join->add_option("--tasks-csv", join_tasks_csv, "per-task input size CSV");

  // --- oracle ----------------------------------------------------------------
  auto* orc = app.add_subcommand("oracle", "brute-force reference join");
  std::string orc_data, orc_out;
  ParamFlags orc_params;
  orc->add_option("--data", orc_data, "dataset CSV")->required();
  orc_params.attach(orc);
  orc->add_option("--out", orc_out, "results CSV path");

  // --- verify ----------------------------------------------------------------
  auto* ver = app.add_subcommand("verify", "run oracle and a pipeline, diff the results");
  std::string ver_data, ver_algo = "dtjr";
  std::filesystem::path ver_workdir = default_workdir();
  ParamFlags ver_params;
  int ver_workers = 4;
  int ver_parts = 8;
  ver->add_option("--data", ver_data, "dataset CSV")->required();
  ver->add_option("--algo", ver_algo, "dtjb|dtjr|dtji");
  ver->add_option("--workdir", ver_workdir, "preprocessed workdir (dtjr/dtji)");
  ver_params.attach(ver);
  ver->add_option("--workers", ver_workers, "parallel worker count");
  ver->add_option("--parts", ver_parts, "uniform partition count (dtjb)");

  // --- bench -----------------------------------------------------------------
  auto* ben = app.add_subcommand("bench", "parameter sweep, one CSV row per (algo, value)");
  std::string ben_data, ben_algos = "dtjr,dtji", ben_param = "eps_t", ben_out;
  std::filesystem::path ben_workdir = default_workdir();
  ParamFlags ben_params;
  std::vector<double> ben_values;
  int ben_workers = 4;
  int ben_parts = 8;
  ben->add_option("--data", ben_data, "dataset CSV (needed for dtjb)");
  ben->add_option("--workdir", ben_workdir, "preprocessed workdir");
  ben->add_option("--algos", ben_algos, "comma-separated subset of dtjb,dtjr,dtji");
  ben->add_option("--param", ben_param, "swept parameter: eps_t|eps_sp|delta_t");
  ben->add_option("--values", ben_values, "sweep values")->required()->delimiter(',');
  ben_params.attach(ben);
  ben->add_option("--workers", ben_workers, "parallel worker count");
  ben->add_option("--parts", ben_parts, "uniform partition count (dtjb)");
  ben->add_option("--out", ben_out, "output CSV")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const Dataset data = generate_dataset(spec);
      write_dataset_csv(data, gen_out);
      std::cout << "wrote " << data.point_count() << " points / " << data.trajectory_count()
                << " trajectories to " << gen_out << '\n';
      return 0;
    }

    if (*rep) {
      if (pre.m == 0 && pre.block_size_bytes == 0) {
        std::cerr << "error: pass --blocks or --block-size\n";
        return 2;
      }
      pre.explicit_rate = rate_given;
      const Dataset data = parse_dataset_csv(rep_data);
      const auto manifest = preprocess(data, rep_workdir, pre);
      std::cout << "repartitioned " << manifest.point_count << " points into " << manifest.m
                << " files (k=" << manifest.k << ") under " << rep_workdir.string() << '\n';
      if (manifest.has_quadtree) {
        std::cout << "quadtree: " << manifest.quadtree_leaves.size() << " leaves (threshold "
                  << manifest.quadtree_threshold << " points)\n";
      }
      return 0;
    }

    if (*join) {
      const auto variant = variant_from_name(join_algo);
      if (!variant) {
        std::cerr << "error: unknown --algo '" << join_algo << "' (use dtjb|dtjr|dtji)\n";
        return 2;
      }
      PipelineConfig cfg;
      cfg.variant = *variant;
      cfg.workers = join_workers;
      cfg.n_parts = join_parts;
      cfg.params = join_params.resolve();
      cfg.workdir = join_workdir;

      Dataset data;
      const Dataset* data_ptr = nullptr;
      if (!join_data.empty()) {
        data = parse_dataset_csv(join_data);
        data_ptr = &data;
      } else if (cfg.variant == Variant::DTJb) {
        std::cerr << "error: dtjb requires --data\n";
        return 2;
      }
      const auto out = run_pipeline(data_ptr, cfg);
      if (!join_out.empty()) write_result_csv(out.rows, join_out);
      if (!join_metrics.empty()) {
        write_metrics(out.metrics, cfg.variant, cfg.workers, join_metrics, join_tasks_csv);
      }
      std::cout << variant_name(cfg.variant) << ": " << out.metrics.result_pairs << " pairs in "
                << format_double(out.metrics.total_s()) << "s (join "
                << format_double(out.metrics.wall_join_s) << "s)\n";
      return 0;
    }

    if (*orc) {
      const Dataset data = parse_dataset_csv(orc_data);
      const auto pairs = oracle_join(data, orc_params.resolve());
      const auto rows = rows_from_match_pairs(data, pairs);
      if (!orc_out.empty()) write_result_csv(rows, orc_out);
      std::cout << "oracle: " << rows.size() << " pairs\n";
      return 0;
    }

    if (*ver) {
      const auto variant = variant_from_name(ver_algo);
      if (!variant) {
        std::cerr << "error: unknown --algo '" << ver_algo << "'\n";
        return 2;
      }
      const Dataset data = parse_dataset_csv(ver_data);
      const JoinParams params = ver_params.resolve();
      const auto oracle_rows = rows_from_match_pairs(data, oracle_join(data, params));

      PipelineConfig cfg;
      cfg.variant = *variant;
      cfg.workers = ver_workers;
      cfg.n_parts = ver_parts;
      cfg.params = params;
      cfg.workdir = ver_workdir;
      const auto out = run_pipeline(&data, cfg);
      return diff_and_report(result_lines(oracle_rows), result_lines(out.rows), ver_algo);
    }

    if (*ben) {
      std::vector<Variant> algos;
      {
        std::stringstream ss(ben_algos);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          auto v = variant_from_name(tok);
          if (!v) {
            std::cerr << "error: unknown algo '" << tok << "' in --algos\n";
            return 2;
          }
          algos.push_back(*v);
        }
      }
      if (ben_param != "eps_t" && ben_param != "eps_sp" && ben_param != "delta_t") {
        std::cerr << "error: --param must be eps_t, eps_sp or delta_t\n";
        return 2;
      }
      Dataset data;
      const Dataset* data_ptr = nullptr;
      if (!ben_data.empty()) {
        data = parse_dataset_csv(ben_data);
        data_ptr = &data;
      }
      std::ofstream out(ben_out, std::ios::binary);
      if (!out) {
        std::cerr << "error: cannot write " << ben_out << '\n';
        return 2;
      }
      out << "algo,param,value,partition_s,join_s,shuffle_s,refine_s,total_s,result_pairs,"
             "join_input_stddev\n";
      for (Variant v : algos) {
        for (double raw : ben_values) {
          JoinParams params = ben_params.resolve();
          double value = raw;
          if (ben_param != "eps_sp" && ben_params.minutes) value *= 60.0;
          if (ben_param == "eps_t") params.eps_t = value;
          else if (ben_param == "eps_sp") params.eps_sp = value;
          else params.delta_t = value;

          PipelineConfig cfg;
          cfg.variant = v;
          cfg.workers = ben_workers;
          cfg.n_parts = ben_parts;
          cfg.params = params;
          cfg.workdir = ben_workdir;
          const auto res = run_pipeline(data_ptr, cfg);
          const auto& m = res.metrics;
          out << variant_name(v) << ',' << ben_param << ',' << format_double(raw) << ','
              << format_double(m.wall_partition_s) << ',' << format_double(m.wall_join_s) << ','
              << format_double(m.wall_shuffle_s) << ',' << format_double(m.wall_refine_s) << ','
              << format_double(m.total_s()) << ',' << m.result_pairs << ','
              << format_double(m.task_input_stddev) << '\n';
        }
      }
      std::cout << "bench: wrote " << ben_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace dtj
