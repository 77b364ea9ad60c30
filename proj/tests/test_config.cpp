#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "iada/config.hpp"

using namespace iada;
using Catch::Approx;

TEST_CASE("config parsing") {
  SECTION("sections, comments, and whitespace") {
    const auto doc = parse_config_text(
        "# comment\n[train]\n  learning_rate = 0.01 \n\n[loss]\nlambda0=0.2\n",
        "test");
    REQUIRE(doc.sections.at("train").at("learning_rate").value == "0.01");
    REQUIRE(doc.sections.at("loss").at("lambda0").value == "0.2");
    REQUIRE(doc.sections.at("loss").at("lambda0").line == 6);
  }
  SECTION("key outside a section rejected with line number") {
    REQUIRE_THROWS_WITH(parse_config_text("a = 1\n", "f"),
                        Catch::Matchers::ContainsSubstring("f:1"));
  }
  SECTION("malformed line rejected") {
    REQUIRE_THROWS_AS(parse_config_text("[train]\nnonsense\n", "f"), ConfigError);
  }
}

TEST_CASE("config materialization and validation") {
  SECTION("unknown key carries its location") {
    const auto doc =
        parse_config_text("[train]\nlearning_rat = 0.1\n", "typo.cfg");
    REQUIRE_THROWS_WITH(materialize_config(doc),
                        Catch::Matchers::ContainsSubstring("typo.cfg:2") &&
                            Catch::Matchers::ContainsSubstring("learning_rat"));
  }
  SECTION("unknown section rejected") {
    const auto doc = parse_config_text("[nope]\nx = 1\n", "f");
    REQUIRE_THROWS_AS(materialize_config(doc), ConfigError);
  }
  SECTION("type errors carry key and line") {
    const auto doc =
        parse_config_text("[train]\nlearning_rate = fast\n", "bad.cfg");
    REQUIRE_THROWS_WITH(materialize_config(doc),
                        Catch::Matchers::ContainsSubstring("bad.cfg:2"));
  }
  SECTION("weight_decay and lambda1 cannot both be set") {
    const auto doc = parse_config_text(
        "[train]\nweight_decay = 1e-4\n[loss]\nlambda1 = 1e-3\n", "dup.cfg");
    REQUIRE_THROWS_WITH(materialize_config(doc),
                        Catch::Matchers::ContainsSubstring("weight_decay"));
  }
  SECTION("constraint violations surface before any computation") {
    const auto doc = parse_config_text(
        "[domains]\nsource_pi = 0.5,0.6\n", "sum.cfg");
    REQUIRE_THROWS_AS(materialize_config(doc), ValueError);
  }
  SECTION("values land in the right fields") {
    const auto doc = parse_config_text(
        "[domains]\nd = 4\nclasses = 2\ntarget_mean_shift = 0.5\n"
        "[train]\nseeds = 5,6\nthreshold_mode = frozen\nalloc_hint = uniform\n"
        "[loss]\nfocal_gamma = 1.5\n",
        "ok.cfg");
    const auto cfg = materialize_config(doc);
    REQUIRE(cfg.domains.d == 4);
    REQUIRE(cfg.domains.target_mean_shift ==
            std::vector<double>{0.5, 0.5, 0.5, 0.5});
    REQUIRE(cfg.train.seeds == std::vector<std::uint64_t>{5, 6});
    REQUIRE(cfg.train.threshold_mode == ThresholdMode::frozen);
    REQUIRE(cfg.train.alloc_hint == AllocHint::uniform);
    REQUIRE(cfg.train.loss.focal_gamma == 1.5);
  }
}

TEST_CASE("config echo round trip") {
  const ExperimentConfig cfg = preset_config("ed4-ed3");
  const std::string text = config_to_text(cfg);
  const ExperimentConfig back =
      materialize_config(parse_config_text(text, "echo"));
  REQUIRE(back.domains.target_pi == cfg.domains.target_pi);
  REQUIRE(back.domains.target_n == cfg.domains.target_n);
  REQUIRE(back.train.learning_rate == cfg.train.learning_rate);
  REQUIRE(back.train.loss.lambda0 == cfg.train.loss.lambda0);
  REQUIRE(config_to_text(back) == text);  // fixpoint
}

TEST_CASE("presets") {
  SECTION("all four materialize and validate") {
    for (const auto& name : preset_names()) {
      const ExperimentConfig cfg = preset_config(name);
      REQUIRE(cfg.domains.source_pi == std::vector<double>{0.289, 0.711});
      cfg.domains.source_spec().validate();
      cfg.domains.target_spec().validate();
    }
  }
  SECTION("ed4-ed3 carries the documented target mix") {
    const ExperimentConfig cfg = preset_config("ed4-ed3");
    REQUIRE(cfg.domains.target_pi == std::vector<double>{0.453, 0.547});
    REQUIRE(cfg.domains.target_n == 258);
  }
  SECTION("difficulty ordering by target noise") {
    REQUIRE(preset_config("ed4-ed4").domains.target_noise_scale <
            preset_config("ed4-ed3").domains.target_noise_scale);
    REQUIRE(preset_config("ed4-ed3").domains.target_noise_scale <
            preset_config("ed4-ed2").domains.target_noise_scale);
    REQUIRE(preset_config("ed4-ed2").domains.target_noise_scale <
            preset_config("ed4-ed1").domains.target_noise_scale);
  }
  SECTION("unknown preset rejected") {
    REQUIRE_THROWS_AS(preset_config("ed0-ed9"), ConfigError);
  }
}

TEST_CASE("resolve_config overlays file over preset and applies seed override") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "iada_cfg_test";
  fs::create_directories(dir);
  const std::string path = (dir / "override.cfg").string();
  {
    std::ofstream f(path);
    f << "[train]\niterations = 123\n";
  }
  const ExperimentConfig cfg = resolve_config("ed4-ed3", path, 42);
  REQUIRE(cfg.train.iterations == 123);
  REQUIRE(cfg.train.seeds == std::vector<std::uint64_t>{42});
  REQUIRE(cfg.domains.target_n == 258);  // preset field survives

  REQUIRE_THROWS_AS(resolve_config("", "", -1), ConfigError);
}
