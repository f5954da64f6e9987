#include <gtest/gtest.h>

#include "../tools/acceptance/acceptance.hpp"

namespace fluidmc::acceptance {
namespace {

TEST(Acceptance, RelativeError) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_NEAR(relative_error(1.05, 1.0), 0.05, 1e-15);
}

TEST(Acceptance, JunitMarksFailures) {
  const std::vector<Outcome> o{{"1", "ok", true, "fine", 0.5}, {"2", "bad <x>", false, "a & b", 0.1}};
  const auto xml = junit_xml("s", o);
  EXPECT_NE(xml.find("tests=\"2\" failures=\"1\""), std::string::npos);
  EXPECT_NE(xml.find("a &amp; b"), std::string::npos);
  EXPECT_NE(xml.find("bad &lt;x&gt;"), std::string::npos);
}

}  // namespace
}  // namespace fluidmc::acceptance
