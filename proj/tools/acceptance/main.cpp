#include <iostream>

#include <CLI11.hpp>

#include "acceptance.hpp"
#include "fluidmc/io.hpp"

#ifndef FLUIDMC_MODELS_DIR
#define FLUIDMC_MODELS_DIR "models"
#endif

int main(int argc, char** argv) {
  using namespace fluidmc::acceptance;
  CLI::App app{"Acceptance criteria and golden cases", "fluidmc-acceptance"};
  std::string suite = "all";
  std::string models = FLUIDMC_MODELS_DIR;
  std::string junit;
  std::uint64_t seed = 20240501;
  std::vector<int> only;
  app.add_option("--suite", suite, "Which suite to run")
      ->check(CLI::IsMember({"all", "criteria", "golden"}))
      ->capture_default_str();
  app.add_option("--models", models, "Directory with the model assets")->capture_default_str();
  app.add_option("--seed", seed, "Simulation seed")->capture_default_str();
  app.add_option("--criterion", only, "Run only these criteria (1-6)")->check(CLI::Range(1, 6));
  app.add_option("--junit", junit, "Write a junit-style XML summary");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const Context ctx{models, seed, std::cout, std::set<int>(only.begin(), only.end())};
  std::vector<Outcome> all;
  try {
    if (suite == "all" || suite == "criteria") {
      auto c = run_criteria(ctx);
      all.insert(all.end(), c.begin(), c.end());
    }
    if (suite == "all" || suite == "golden") {
      auto g = run_golden(ctx);
      all.insert(all.end(), g.begin(), g.end());
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << "\n";
    return 3;
  }

  std::size_t failed = 0;
  std::cout << "\nsummary\n";
  for (const auto& o : all) {
    failed += !o.pass;
    const bool criterion = o.id.size() == 1;
    std::cout << (criterion ? "criterion " : "golden ") << o.id << ": " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.title << "\n";
  }
  std::cout << all.size() - failed << "/" << all.size() << " passed\n";
  if (!junit.empty()) fluidmc::write_text_file(junit, junit_xml("fluidmc-acceptance-" + suite, all));
  return failed == 0 ? 0 : 1;
}
