#include <doctest.h>

#include <random>
#include <sstream>

#include "mgids/csv.hpp"
#include "mgids/errors.hpp"
#include "mgids/table.hpp"

using namespace mgids;
using data::SampleTable;

TEST_CASE("schema") {
  const auto& h = data::labeled_header();
  REQUIRE(h.size() == 39);
  CHECK(h.front() == "time");
  CHECK(h[1] == "V1");
  CHECK(h[4] == "I1");
  CHECK(h[7] == "P_DG1");
  CHECK(h[8] == "Q_DG1");
  CHECK(h[9] == "f_DG1");
  CHECK(h[36] == "f_DG10");
  CHECK(h[37] == "label_bin");
  CHECK(h[38] == "label_multi");
  CHECK(data::feature_names().size() == 36);
  CHECK(data::unlabeled_header().size() == 37);
}

TEST_CASE("table access") {
  SampleTable t({"time", "a", "b"});
  t.append_row(std::vector<double>{0.0, 1.0, 2.0});
  t.append_row(std::vector<double>{0.1, 3.0, 4.0});
  CHECK(t.n_rows() == 2);
  CHECK(t.at(1, t.col("b")) == 4.0);
  CHECK_THROWS_AS(t.col("c"), DataError);
  CHECK_THROWS_AS(t.append_row(std::vector<double>{1.0}), DataError);
  const std::size_t rows[] = {1};
  CHECK(t.select_rows(rows).at(0, 1) == 3.0);
  const auto ba = t.select_columns({"b", "a"});
  CHECK(ba.columns() == std::vector<std::string>{"b", "a"});
  CHECK(ba.at(0, 0) == 2.0);
}

TEST_CASE("CSV round trip is bitwise at the declared precision") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e5, 1e5);
  SampleTable t(data::labeled_header());
  for (int r = 0; r < 200; ++r) {
    std::vector<double> row(39);
    for (auto& x : row) x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 13) - 6);
    row[0] = r * 1e-4;
    row[37] = static_cast<double>(r % 2);
    row[38] = static_cast<double>(r % 7);
    t.append_row(row);
  }
  std::stringstream first;
  data::write_csv(t, first);
  const auto once = data::read_csv(first);
  std::stringstream second;
  data::write_csv(once, second);
  CHECK(first.str() == second.str());
  std::stringstream again(second.str());
  CHECK(data::read_csv(again) == once);
  // 9 significant digits preserve each value to 5e-9 relative.
  for (std::size_t i = 0; i < t.raw().size(); ++i) {
    CHECK(once.raw()[i] == doctest::Approx(t.raw()[i]).epsilon(5e-9));
  }
}

TEST_CASE("format") {
  CHECK(data::format_value(0.7) == "0.7");
  CHECK(data::format_value(1.0 / 3.0) == "0.333333333");
  CHECK(data::format_value(376.99111843077515) == "376.991118");
}

TEST_CASE("malformed CSV names the line") {
  std::istringstream short_row("time,a\n0,1\n0.1\n");
  try {
    data::read_csv(short_row);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream bad_number("time,a\n0,1x\n");
  CHECK_THROWS_AS(data::read_csv(bad_number), DataError);
  std::istringstream empty("");
  CHECK_THROWS_AS(data::read_csv(empty), DataError);
}

TEST_CASE("labeled data extraction") {
  SampleTable t(data::labeled_header());
  std::vector<double> row(39, 0.5);
  row[37] = 1;
  row[38] = 4;
  t.append_row(row);
  const auto d = data::to_labeled_data(t);
  CHECK(d.n_rows == 1);
  CHECK(d.n_features == 36);
  CHECK(d.feature_names == data::feature_names());
  CHECK(d.label_bin[0] == 1);
  CHECK(d.label_multi[0] == 4);
}
