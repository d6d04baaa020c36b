// pepsim: command-line front end for the PEPS simulation library.
//
// Subcommands: ite, vqe, rqc-bench, contract-bench, expect.  Each takes a
// JSON config (--config), an optional seed override (--seed) and an output
// path (--out).  Exit codes: 0 success, 2 config error, 3 resource error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "peps/backend.hpp"
#include "peps/drivers.hpp"
#include "peps/errors.hpp"

#if defined(__has_include)
#if __has_include(<cblas.h>)
#include <cblas.h>
#define PEPSIM_HAVE_CBLAS 1
#endif
#endif

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  long long seed = -1;
  int threads = 0;
  bool strict = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file")->required();
  cmd->add_option("--out", args.out_path, "output file (default: stdout)");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--threads", args.threads, "BLAS thread count (0 = library default)");
  cmd->add_flag("--strict-deterministic", args.strict,
                "serial reductions regardless of threading");
}

std::string read_config(const CommonArgs& args) {
  std::ifstream f(args.config_path);
  if (!f) throw peps::ConfigError("cannot open config file '" + args.config_path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  if (args.seed >= 0) {
    // Override the seed without reformatting the rest of the config.
    auto j = nlohmann::ordered_json::parse(text, nullptr, false);
    if (j.is_discarded()) return text;  // let the driver report line/column
    j["seed"] = static_cast<std::uint64_t>(args.seed);
    return j.dump();
  }
  return text;
}

void apply_backend(const CommonArgs& args) {
  peps::Backend b;
  b.strict_deterministic = args.strict;
  b.threads = args.threads;
  peps::set_backend(b);
#ifdef PEPSIM_HAVE_CBLAS
  if (args.threads > 0) openblas_set_num_threads(args.threads);
#endif
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << std::endl;
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw peps::ConfigError("cannot open output file '" + out_path + "'");
  f << text << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PEPS simulation toolkit"};
  app.require_subcommand(1);

  CommonArgs ite_args, vqe_args, rqc_args, bench_args, expect_args;
  std::string bench_csv_path;

  CLI::App* ite = app.add_subcommand("ite", "imaginary time evolution");
  add_common(ite, ite_args);
  CLI::App* vqe = app.add_subcommand("vqe", "variational quantum eigensolver");
  add_common(vqe, vqe_args);
  CLI::App* rqc = app.add_subcommand("rqc-bench", "random-circuit contraction accuracy sweep");
  add_common(rqc, rqc_args);
  CLI::App* bench = app.add_subcommand("contract-bench", "contraction cost/accuracy benchmark");
  add_common(bench, bench_args);
  bench->add_option("--csv", bench_csv_path, "CSV output path (default: stdout)");
  CLI::App* expect = app.add_subcommand("expect", "expectation value of an observable");
  add_common(expect, expect_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << std::endl;
    return 2;
  }

  try {
    if (*ite) {
      apply_backend(ite_args);
      emit(peps::run_ite_json(read_config(ite_args)), ite_args.out_path);
    } else if (*vqe) {
      apply_backend(vqe_args);
      emit(peps::run_vqe_json(read_config(vqe_args)), vqe_args.out_path);
    } else if (*rqc) {
      apply_backend(rqc_args);
      emit(peps::run_rqc_bench_json(read_config(rqc_args)), rqc_args.out_path);
    } else if (*bench) {
      apply_backend(bench_args);
      std::string result_json;
      std::string csv = peps::run_contract_bench_csv(read_config(bench_args), &result_json);
      if (!bench_csv_path.empty()) {
        emit(csv, bench_csv_path);
        emit(result_json, bench_args.out_path);
      } else if (!bench_args.out_path.empty()) {
        emit(result_json, bench_args.out_path);
        std::cout << csv;
      } else {
        std::cout << csv;
      }
    } else if (*expect) {
      apply_backend(expect_args);
      emit(peps::run_expect_json(read_config(expect_args)), expect_args.out_path);
    }
  } catch (const peps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const peps::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
