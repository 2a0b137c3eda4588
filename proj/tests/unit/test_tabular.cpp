#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "mieval/error.hpp"
#include "mieval/tabular.hpp"

using namespace mieval;
using namespace fixtures;

namespace {

std::vector<ColumnSpec> small_schema() {
  ColumnSpec bmi{"BMI", Kind::numeric, Role::predictor, {20, 25, 30, 35, 40}, {}, std::nullopt, true, {}};
  ColumnSpec male{"male", Kind::binary, Role::predictor, {}, {}, std::nullopt, false, {}};
  ColumnSpec race{"Race", Kind::categorical, Role::predictor, {}, {"White", "Black", "Asian", "Other"}, std::nullopt, false, {}};
  return {bmi, male, race};
}

}  // namespace

TEST_CASE("load_csv parses values and empty fields become masked cells") {
  std::istringstream in("BMI,male,Race\n27.5,1,White\n,0,Black\n31,1,\"Other\"\n");
  const Dataset ds = read_csv(in, small_schema());
  REQUIRE(ds.rows() == 3);
  CHECK(ds.is_missing(1, 0));
  CHECK_FALSE(ds.cell(1, 0).has_value());
  CHECK(ds.cell(0, 0).value() == 27.5);
  CHECK(ds.cell(2, 2).value() == 3.0);
  CHECK(ds.missing_cells() == 1);
}

TEST_CASE("load_csv rejects invalid values, unknown columns and undeclared categories") {
  SUBCASE("binary column") {
    std::istringstream in("BMI,male,Race\n27,purple,White\n");
    CHECK_THROWS_WITH_AS(read_csv(in, small_schema()), doctest::Contains("invalid value"), Error);
  }
  SUBCASE("unknown column") {
    std::istringstream in("BMI,male,Race,shoe\n27,1,White,4\n");
    CHECK_THROWS_WITH_AS(read_csv(in, small_schema()), doctest::Contains("unknown column"), Error);
  }
  SUBCASE("category") {
    std::istringstream in("BMI,male,Race\n27,1,Martian\n");
    CHECK_THROWS_WITH_AS(read_csv(in, small_schema()), doctest::Contains("category outside"), Error);
  }
  SUBCASE("unparseable number") {
    std::istringstream in("BMI,male,Race\n2x7,1,White\n");
    CHECK_THROWS_AS(read_csv(in, small_schema()), Error);
  }
}

TEST_CASE("CSV write then read reproduces the dataset bit for bit") {
  const Dataset ds({numeric("x", {0.1, 1e-300, NA, -3.25, 1.0 / 3.0}), binary("b", {1, 0, 1, NA, 0}),
                    categorical("c", {"a,b", "q\"t", "plain"}, {0, 1, 2, NA, 1})});
  std::stringstream buf;
  write_csv(ds, buf);
  const Dataset back = read_csv(buf, ds.schema());
  CHECK(back == ds);
}

TEST_CASE("schema JSON round trip") {
  auto schema = small_schema();
  schema[2].reference_category = "White";
  CHECK(schema_from_json(schema_to_json(schema)) == schema);
}

TEST_CASE("bin_numeric uses left-closed, right-open intervals") {
  const Dataset ds({numeric("BMI", {27, 30, NA, 19.99, 40, 55}, {20, 25, 30, 35, 40})});
  const Dataset b = bin_numeric(ds, "BMI");
  const auto& col = b.column(0);
  REQUIRE(col.spec.kind == Kind::categorical);
  auto label = [&](std::size_t i) { return col.spec.categories[static_cast<std::size_t>(col.values[i])]; };
  CHECK(label(0) == "25≤BMI<30");
  CHECK(label(1) == "30≤BMI<35");
  CHECK(b.is_missing(2, 0));
  CHECK(label(3) == "BMI<20");
  CHECK(label(4) == "BMI≥40");
  CHECK(label(5) == "BMI≥40");
  CHECK_THROWS_WITH_AS(bin_numeric(Dataset({numeric("age", {1, 2})}), "age"), doctest::Contains("bins undeclared"), Error);
}

TEST_CASE("one_hot drops the largest category and propagates missingness") {
  // White largest.
  const Dataset ds({categorical("Race", {"White", "Black", "Asian", "Other"}, {0, 0, 0, 1, 2, 3, NA, 0}),
                    numeric("z", {1, 2, 3, 4, 5, 6, 7, 8})});
  const Dataset oh = one_hot(ds, "Race");
  REQUIRE(oh.cols() == 4);
  CHECK(oh.column(0).spec.name == "Race=Black");
  CHECK(oh.column(1).spec.name == "Race=Asian");
  CHECK(oh.column(2).spec.name == "Race=Other");
  CHECK_FALSE(oh.find("Race=White").has_value());
  for (std::size_t j = 0; j < 3; ++j) CHECK(oh.is_missing(6, j));
  CHECK(oh.column(3) == ds.column(1));  // unrelated column untouched

  const Dataset two({categorical("sex", {"F", "M"}, {0, 1, 1})});
  const Dataset oh2 = one_hot(two, "sex");
  REQUIRE(oh2.cols() == 1);
  CHECK(oh2.column(0).spec.name == "sex=F");

  CHECK_THROWS_AS(one_hot(Dataset({categorical("one", {"only"}, {0, 0})}), "one"), Error);
}

TEST_CASE("listwise deletion keeps complete rows in order") {
  const Dataset fig = pattern_fixture();
  CHECK(fig.rows() == 56123);
  const Dataset cc = listwise_delete(fig);
  CHECK(cc.rows() == 32529);
  CHECK(cc.complete());

  const Dataset full({numeric("x", {3, 1, 2})});
  CHECK(listwise_delete(full) == full);

  const Dataset none({numeric("x", {NA, 1}), numeric("y", {1, NA})});
  CHECK_THROWS_WITH_AS(listwise_delete(none), doctest::Contains("no complete cases"), Error);
}

TEST_CASE("pattern_summary on the cohort missingness fixture") {
  const auto table = pattern_summary(pattern_fixture());
  CHECK(table.n == 56123);
  CHECK(table.complete == 32529);
  CHECK(table.incomplete == 23594);
  REQUIRE(table.entries.size() == 8);
  CHECK(table.entries[0].variables.empty());
  const auto& bmi_only = table.entries[1];
  CHECK(bmi_only.variables == std::vector<std::string>{"BMI"});
  CHECK(bmi_only.count == 9993);
  CHECK(bmi_only.percent == doctest::Approx(17.8).epsilon(0.002));
  std::size_t total = 0;
  for (const auto& e : table.entries) total += e.count;
  CHECK(total == table.n);
}

TEST_CASE("pattern_summary matches a manual tally") {
  const Dataset ds({numeric("a", {1, NA, 3, NA, 5}), numeric("b", {1, 2, 3, NA, 5})});
  const auto table = pattern_summary(ds);
  REQUIRE(table.entries.size() == 3);
  CHECK(table.entries[0].count == 3);
  CHECK(table.entries[0].variables.empty());
  // Two singleton patterns; ties keep canonical order.
  CHECK(table.entries[1].count == 1);
  CHECK(table.entries[2].count == 1);

  const auto full = pattern_summary(Dataset({numeric("a", {1, 2})}));
  REQUIRE(full.entries.size() == 1);
  CHECK(full.entries[0].percent == 100.0);
}

TEST_CASE("binarize_for_estimation counts and idempotence") {
  const Dataset ds({numeric("v", {1, 5, 9, 2}, {3, 6}), binary("b", {0, 1, 1, 0})});
  const Dataset out = binarize_for_estimation(ds);
  // 3 bins -> 2 indicators, plus the binary.
  CHECK(out.cols() == 3);
  for (const auto& c : out.columns()) CHECK(c.spec.kind == Kind::binary);
  CHECK(binarize_for_estimation(out) == out);

  const Dataset all_binary({binary("x", {0, 1}), binary("y", {1, 1})});
  CHECK(binarize_for_estimation(all_binary) == all_binary);
}

TEST_CASE("fuzzy indicator columns threshold at 0.5 or pass through") {
  auto col = numeric("Race=Black", {0.2, 0.7, 1.0, 0.5});
  col.spec.indicator_of = "Race";
  const Dataset ds({col});
  const Dataset t = binarize_for_estimation(ds, FuzzyMode::threshold);
  CHECK(t.column(0).spec.kind == Kind::binary);
  CHECK(t.column(0).values == std::vector<double>{0, 1, 1, 1});
  CHECK(binarize_for_estimation(ds, FuzzyMode::as_is) == ds);
}

TEST_CASE("resolve_references freezes the largest group") {
  const Dataset r1 = resolve_references(Dataset({numeric("BMI", {31, 32, 33, 26, 45}, {20, 25, 30, 35, 40})}));
  CHECK(r1.column(0).spec.reference_category == std::optional<std::string>("30≤BMI<35"));
  const Dataset r2 = resolve_references(Dataset({categorical("c", {"x", "y"}, {1, 1, 0})}));
  CHECK(r2.column(0).spec.reference_category == std::optional<std::string>("y"));
}
