#include <gtest/gtest.h>

#include <set>
#include <string>

#include "fdia/matpower_io.hpp"

using namespace fdia;

namespace {

// Counts data rows between "mpc.<block> = [" and "];" by plain text scanning.
std::size_t count_rows(std::string_view text, const std::string& block) {
  const auto start = text.find("mpc." + block + " = [");
  const auto end = text.find("];", start);
  std::size_t rows = 0;
  std::size_t pos = text.find('\n', start) + 1;
  while (pos < end) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl - pos);
    if (line.find(';') != std::string_view::npos && line.find('%') == std::string_view::npos) ++rows;
    pos = nl + 1;
  }
  return rows;
}

const char* kTwoBus = R"(function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0;
  2 1 0 0 0 0 1 1 -5.5;
];
mpc.branch = [
  1 2 0 0.1 0 0 0 0 0 0 1;
];
)";

}  // namespace

TEST(MatpowerIo, BuiltinSizes) {
  struct Expect {
    BuiltinCase which;
    std::size_t buses, branches;
  };
  for (auto e : {Expect{BuiltinCase::ieee9, 9, 9}, Expect{BuiltinCase::ieee57, 57, 80},
                 Expect{BuiltinCase::ieee118, 118, 186}}) {
    const auto cs = load_builtin(e.which);
    EXPECT_EQ(cs.buses.size(), e.buses);
    EXPECT_EQ(cs.branches.size(), e.branches);
    // independent count from the raw text
    EXPECT_EQ(count_rows(builtin_text(e.which), "bus"), e.buses);
    EXPECT_EQ(count_rows(builtin_text(e.which), "branch"), e.branches);
  }
}

TEST(MatpowerIo, BuiltinInvariants) {
  for (auto which : {BuiltinCase::ieee9, BuiltinCase::ieee57, BuiltinCase::ieee118}) {
    const auto cs = load_builtin(which);
    std::set<int> ids;
    int refs = 0;
    for (const auto& b : cs.buses) {
      ids.insert(b.id);
      refs += b.bus_type == BusType::reference;
    }
    EXPECT_EQ(ids.size(), cs.buses.size());
    EXPECT_EQ(refs, 1);
    for (const auto& br : cs.branches) {
      EXPECT_TRUE(ids.count(br.from_bus));
      EXPECT_TRUE(ids.count(br.to_bus));
      EXPECT_NE(br.from_bus, br.to_bus);
      EXPECT_NE(br.reactance, 0.0);
      EXPECT_EQ(br.status, BranchStatus::in_service);
    }
  }
}

TEST(MatpowerIo, RowOrderPreserved) {
  const auto cs = load_builtin(BuiltinCase::ieee9);
  EXPECT_EQ(cs.branches.front().from_bus, 1);
  EXPECT_EQ(cs.branches.front().to_bus, 4);
  EXPECT_EQ(cs.branches.back().from_bus, 9);
  EXPECT_DOUBLE_EQ(cs.branches.back().reactance, 0.085);
  EXPECT_DOUBLE_EQ(cs.buses[1].voltage_angle, 9.6687);
}

TEST(MatpowerIo, TwoBusCase) {
  const auto cs = parse_case(kTwoBus);
  EXPECT_EQ(cs.name, "tiny");
  ASSERT_EQ(cs.buses.size(), 2u);
  ASSERT_EQ(cs.branches.size(), 1u);
  EXPECT_DOUBLE_EQ(cs.buses[1].voltage_angle, -5.5);
  EXPECT_EQ(cs.buses[0].bus_type, BusType::reference);
}

TEST(MatpowerIo, MissingSemicolonNamesLine) {
  std::string text(builtin_text(BuiltinCase::ieee9));
  const std::string row = "\t7\t8\t0.0085\t0.072\t0.149\t250\t250\t250\t0\t0\t1\t-360\t360;";
  const auto at = text.find(row);
  ASSERT_NE(at, std::string::npos);
  text.erase(at + row.size() - 1, 1);
  std::size_t expected_line = 1;
  for (std::size_t i = 0; i < at; ++i) expected_line += text[i] == '\n';
  try {
    parse_case(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), expected_line);
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(expected_line)), std::string::npos);
  }
}

TEST(MatpowerIo, StructuralAndValidationErrors) {
  std::string no_branch = kTwoBus;
  no_branch = no_branch.substr(0, no_branch.find("mpc.branch"));
  EXPECT_THROW(parse_case(no_branch), StructureError);

  std::string no_base = kTwoBus;
  no_base.replace(no_base.find("mpc.baseMVA = 100;"), 18, "");
  EXPECT_THROW(parse_case(no_base), StructureError);

  std::string dup = kTwoBus;
  dup.replace(dup.find("  2 1 0"), 7, "  1 1 0");
  EXPECT_THROW(parse_case(dup), ValidationError);

  std::string zero_x = kTwoBus;
  zero_x.replace(zero_x.find("0 0.1 0"), 7, "0 0 0  ");
  EXPECT_THROW(parse_case(zero_x), ValidationError);

  std::string bad_number = kTwoBus;
  bad_number.replace(bad_number.find("-5.5"), 4, "-5x5");
  EXPECT_THROW(parse_case(bad_number), ParseError);
}

TEST(MatpowerIo, OutOfServiceZeroReactanceAllowed) {
  std::string text = kTwoBus;
  text.replace(text.find("  1 2 0 0.1 0 0 0 0 0 0 1;"), 26, "  1 2 0 0.1 0 0 0 0 0 0 1;\n  2 1 0 0 0 0 0 0 0 0 0;");
  const auto cs = parse_case(text);
  ASSERT_EQ(cs.branches.size(), 2u);
  EXPECT_EQ(cs.branches[1].status, BranchStatus::out_of_service);
}

TEST(MatpowerIo, RoundTripAllBuiltins) {
  for (auto which : {BuiltinCase::ieee9, BuiltinCase::ieee57, BuiltinCase::ieee118}) {
    const auto cs = load_builtin(which);
    const auto again = parse_case(serialize_case(cs));
    EXPECT_EQ(cs, again) << builtin_name(which);
    EXPECT_EQ(serialize_case(again), serialize_case(cs));
  }
}

TEST(MatpowerIo, PureAndNamed) {
  EXPECT_EQ(load_builtin(BuiltinCase::ieee57), load_builtin(BuiltinCase::ieee57));
  for (auto which : {BuiltinCase::ieee9, BuiltinCase::ieee57, BuiltinCase::ieee118}) {
    EXPECT_EQ(builtin_from_name(builtin_name(which)), which);
  }
  EXPECT_FALSE(builtin_from_name("ieee14").has_value());
}
