#include <cstdlib>
#include <optional>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "fj/config.hpp"
#include "fj/error.hpp"

namespace {

// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value, 1);
  }
  ~ScopedEnv() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

TEST(Config, SevenDistinctPolicies) {
  std::set<std::string_view> names;
  for (auto kind : fj::all_policies) names.insert(fj::to_string(kind));
  EXPECT_EQ(names.size(), 7u);
}

TEST(Config, PolicyNamesRoundTrip) {
  for (auto kind : fj::all_policies) {
    auto parsed = fj::parse_policy(fj::to_string(kind));
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(*parsed, kind);
  }
  EXPECT_EQ(fj::parse_policy("priority-local"), fj::PolicyKind::PriorityLocal);
  EXPECT_EQ(fj::parse_policy("periodic-priority"), fj::PolicyKind::PeriodicPriority);
  EXPECT_FALSE(fj::parse_policy("Priority-Local").has_value());
  EXPECT_FALSE(fj::parse_policy("").has_value());
}

TEST(Config, DefaultsAreValid) {
  fj::RuntimeConfig c;
  EXPECT_GE(c.num_workers, 1u);
  EXPECT_EQ(c.policy, fj::PolicyKind::PriorityLocal);
  EXPECT_EQ(c.spin_before_park, 100u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ZeroWorkersRejected) {
  fj::RuntimeConfig c;
  c.num_workers = 0;
  try {
    c.validate();
    FAIL() << "expected an error";
  } catch (const fj::Error& e) {
    EXPECT_EQ(e.code(), fj::Errc::invalid_config);
  }
}

TEST(Config, EnvironmentOverrides) {
  ScopedEnv threads("FJ_NUM_THREADS", "3");
  ScopedEnv policy("FJ_POLICY", "hierarchical");
  auto c = fj::RuntimeConfig::from_env();
  EXPECT_EQ(c.num_workers, 3u);
  EXPECT_EQ(c.policy, fj::PolicyKind::Hierarchical);
}

TEST(Config, BadEnvironmentRejected) {
  {
    ScopedEnv threads("FJ_NUM_THREADS", "two");
    EXPECT_THROW(fj::RuntimeConfig::from_env(), fj::Error);
  }
  {
    ScopedEnv threads("FJ_NUM_THREADS", "0");
    EXPECT_THROW(fj::RuntimeConfig::from_env(), fj::Error);
  }
  {
    ScopedEnv policy("FJ_POLICY", "round-robin");
    EXPECT_THROW(fj::RuntimeConfig::from_env(), fj::Error);
  }
}

TEST(Config, ErrorCarriesCode) {
  fj::Error e(fj::Errc::double_resume, "twice");
  EXPECT_EQ(e.code(), fj::Errc::double_resume);
  EXPECT_STREQ(e.what(), "twice");
  EXPECT_STREQ(fj::to_string(fj::Errc::checksum_mismatch), "checksum_mismatch");
}

}  // namespace
