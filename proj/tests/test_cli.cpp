// End-to-end CLI tests: exit codes and artifact determinism, driven through
// the installed binary.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = IADA_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "iada_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A configuration small enough for fast end-to-end runs.
fs::path tiny_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.cfg";
  std::ofstream f(p);
  f << "[domains]\n"
       "d = 3\nclasses = 2\nclass_sep = 2.0\nclass_scales = 0.8,0.8\n"
       "source_n = 120\nsource_pi = 0.4,0.6\nsource_seed = 5\n"
       "target_n = 80\ntarget_pi = 0.5,0.5\ntarget_seed = 6\n"
       "target_mean_shift = 0.5,0,0\ntarget_noise_scale = 0.1\n"
       "[train]\n"
       "iterations = 120\nseeds = 1,2\neval_every = 60\nhidden_dim = 6\n"
       "batch_budget = 12\n"
       "[loss]\n"
       "lambda0 = 0.01\nwarmup_tau = 50\n";
  return p;
}

}  // namespace

TEST_CASE("cli end to end") {
  const fs::path base = fresh_dir("e2e");
  const fs::path cfg = tiny_config(base);
  const fs::path data = base / "data";
  const fs::path out = base / "train_out";

  SECTION("gen is deterministic byte for byte") {
    REQUIRE(run("--config " + cfg.string() + " --out " + data.string() + " gen") == 0);
    REQUIRE(fs::exists(data / "source.csv"));
    REQUIRE(fs::exists(data / "target.csv"));
    REQUIRE(fs::exists(data / "target.labels.csv"));
    REQUIRE(fs::exists(data / "manifest.cfg"));
    const std::string first = slurp(data / "source.csv");

    const fs::path data2 = base / "data2";
    REQUIRE(run("--config " + cfg.string() + " --out " + data2.string() + " gen") == 0);
    REQUIRE(slurp(data2 / "source.csv") == first);
    REQUIRE(slurp(data2 / "target.csv") == slurp(data / "target.csv"));
  }

  SECTION("train produces metrics, summary, and checkpoint; reruns match") {
    REQUIRE(run("--config " + cfg.string() + " --out " + data.string() + " gen") == 0);
    REQUIRE(run("--config " + cfg.string() + " --out " + out.string() +
                " train --data " + data.string()) == 0);
    REQUIRE(fs::exists(out / "metrics.csv"));
    REQUIRE(fs::exists(out / "summary.csv"));
    REQUIRE(fs::exists(out / "checkpoint.bin"));
    REQUIRE(fs::exists(out / "checkpoint.manifest.csv"));

    const std::string metrics1 = slurp(out / "metrics.csv");
    const std::string summary1 = slurp(out / "summary.csv");
    const fs::path out2 = base / "train_out2";
    REQUIRE(run("--config " + cfg.string() + " --out " + out2.string() +
                " train --data " + data.string()) == 0);
    REQUIRE(slurp(out2 / "metrics.csv") == metrics1);
    REQUIRE(slurp(out2 / "summary.csv") == summary1);

    // a different seed changes the metrics
    const fs::path out3 = base / "train_out3";
    REQUIRE(run("--config " + cfg.string() + " --seed-override 77 --out " +
                out3.string() + " train --data " + data.string()) == 0);
    REQUIRE(slurp(out3 / "metrics.csv") != metrics1);

    // summary has one row per seed plus mean and cv rows per split
    std::istringstream ss(summary1);
    std::string line;
    long rows = 0;
    while (std::getline(ss, line)) ++rows;
    REQUIRE(rows == 1 + 3 * (2 + 2));  // header + 3 splits x (2 seeds + 2 aggregate)

    SECTION("report digests the directory") {
      REQUIRE(run("--out " + out.string() + " report") == 0);
      REQUIRE(fs::exists(out / "report.txt"));
    }
  }

  SECTION("preset gen reproduces the study proportions") {
    const fs::path pdata = base / "preset_data";
    REQUIRE(run("--preset ed4-ed3 --out " + pdata.string() + " gen") == 0);
    // source: 1698 rows at pi = [0.289, 0.711] -> exactly 491 / 1207
    std::ifstream src(pdata / "source.csv");
    std::string line;
    std::getline(src, line);  // header
    long c1 = 0, c2 = 0;
    while (std::getline(src, line)) {
      if (line.find(",1,source") != std::string::npos) ++c1;
      else if (line.find(",2,source") != std::string::npos) ++c2;
    }
    REQUIRE(c1 == 491);
    REQUIRE(c2 == 1207);
    // target labels sidecar: 258 rows at pi = [0.453, 0.547] -> 117 / 141
    std::ifstream lab(pdata / "target.labels.csv");
    std::getline(lab, line);  // header
    long t1 = 0, t2 = 0;
    while (std::getline(lab, line)) {
      if (line == "1") ++t1;
      else if (line == "2") ++t2;
    }
    REQUIRE(t1 == 117);
    REQUIRE(t2 == 141);
  }

  SECTION("feature-dimension mismatch exits 2 before training") {
    REQUIRE(run("--config " + cfg.string() + " --out " + data.string() + " gen") == 0);
    const fs::path bad = base / "bad.cfg";
    {
      std::ofstream f(bad);
      f << slurp(cfg) << "\n";
    }
    // Regenerate a config whose d disagrees with the data on disk.
    {
      std::ofstream f(bad);
      f << "[domains]\nd = 5\nclasses = 2\nclass_scales = 0.8,0.8\n"
           "source_n = 120\nsource_pi = 0.4,0.6\n"
           "target_n = 80\ntarget_pi = 0.5,0.5\n"
           "[train]\niterations = 10\nseeds = 1\n";
    }
    REQUIRE(run("--config " + bad.string() + " --out " + (base / "x").string() +
                " train --data " + data.string()) == 2);
  }
}

TEST_CASE("cli error contracts") {
  const fs::path base = fresh_dir("errors");
  const fs::path cfg = tiny_config(base);

  SECTION("invalid config key exits 2") {
    const fs::path bad = base / "bad_key.cfg";
    {
      std::ofstream f(bad);
      f << "[train]\nlearning_rat = 0.1\n";
    }
    REQUIRE(run("--config " + bad.string() + " --out " + (base / "o").string() +
                " gen") == 2);
  }
  SECTION("missing config exits 2") {
    REQUIRE(run("--out " + (base / "o").string() + " gen") == 2);
  }
  SECTION("unusable output path exits 2 and names it") {
    const fs::path blocker = base / "blocker";
    {
      std::ofstream f(blocker);
      f << "file\n";
    }
    REQUIRE(run("--config " + cfg.string() + " --out " +
                (blocker / "sub").string() + " gen") == 2);
  }
  SECTION("unknown theory subcheck exits 2") {
    REQUIRE(run("--config " + cfg.string() + " --out " + (base / "t").string() +
                " theory nonsense") == 2);
  }
  SECTION("sweep writes one ordered row per grid value") {
    const fs::path sout = base / "sweep_ok";
    REQUIRE(run("--config " + cfg.string() + " --out " + sout.string() +
                " sweep --axis lambda_adv --grid 0.001,0.01") == 0);
    std::ifstream f(sout / "sweep.csv");
    std::string line;
    std::getline(f, line);
    REQUIRE(line == "lambda_adv,target_auc_mean,target_auc_cv_percent");
    std::getline(f, line);
    REQUIRE(line.rfind("0.001", 0) == 0);
    std::getline(f, line);
    REQUIRE(line.rfind("0.01", 0) == 0);
    REQUIRE_FALSE(std::getline(f, line));
  }

  SECTION("unknown sweep axis exits 2 and missing grid exits 2") {
    REQUIRE(run("--config " + cfg.string() + " --out " + (base / "s").string() +
                " sweep --axis nope --grid 0.1") == 2);
    REQUIRE(run("--config " + cfg.string() + " --out " + (base / "s").string() +
                " sweep --axis lambda_adv") == 2);
  }
  SECTION("divergent training exits 3") {
    const fs::path data = base / "data";
    REQUIRE(run("--config " + cfg.string() + " --out " + data.string() + " gen") == 0);
    const fs::path diverge = base / "diverge.cfg";
    {
      std::ofstream f(diverge);
      f << slurp(cfg);
      f.seekp(0, std::ios::end);
    }
    {
      std::ofstream f(diverge, std::ios::app);
      f << "\n[train]\nlearning_rate = 1e100\n";
    }
    REQUIRE(run("--config " + diverge.string() + " --out " +
                (base / "d_out").string() + " train --data " + data.string()) == 3);
  }
  SECTION("report on an empty directory exits 2") {
    const fs::path empty = base / "empty";
    fs::create_directories(empty);
    REQUIRE(run("--out " + empty.string() + " report") == 2);
  }
}

TEST_CASE("cli theory subcommands produce reports") {
  const fs::path base = fresh_dir("theory");
  const fs::path cfg = tiny_config(base);
  const fs::path out = base / "t";
  // quick settings for the slow checks
  const fs::path quick = base / "quick.cfg";
  {
    std::ofstream f(quick);
    f << slurp(cfg)
      << "\n[theory]\nconvergence_seeds = 3\nconvergence_iters = 400\n"
         "gradnorm_w_samples = 10\ngradnorm_mc_draws = 2000\n"
         "bound_train_iterations = 150\n";
  }
  REQUIRE(run("--config " + quick.string() + " --out " + out.string() +
              " theory alloc") == 0);
  REQUIRE(fs::exists(out / "theory_alloc.csv"));
  REQUIRE(run("--config " + quick.string() + " --out " + out.string() +
              " theory convergence") == 0);
  REQUIRE(fs::exists(out / "theory_convergence.csv"));
  REQUIRE(run("--config " + quick.string() + " --out " + out.string() +
              " theory gradnorm") == 0);
  REQUIRE(run("--config " + quick.string() + " --out " + out.string() +
              " theory bound") == 0);
  REQUIRE(fs::exists(out / "theory_bound.csv"));

  SECTION("degenerate timing sizes are a config-level error") {
    const fs::path bad = base / "bad_sizes.cfg";
    {
      std::ofstream f(bad);
      f << slurp(cfg) << "\n[theory]\ntiming_sizes = 100x8,100x8\n";
    }
    REQUIRE(run("--config " + bad.string() + " --out " + out.string() +
                " theory complexity") == 2);
  }
}
