#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>

#include "nmfrank/io.hpp"
#include "nmfrank/rng.hpp"
#include "nmfrank/types.hpp"

using namespace nmfrank;

namespace {

DataMatrix from_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_matrix(in, TableFormat::csv);
}

}  // namespace

TEST_CASE("plain 3x2 csv of non-negative ints") {
    const DataMatrix m = from_csv("1,2\n3,4\n5,6\n");
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 2);
    CHECK(m.values(0, 0) == 1.0);
    CHECK(m.values(2, 1) == 6.0);
    CHECK(m.row_labels.empty());
    CHECK(m.removed_rows.empty());
}

TEST_CASE("negative entry reports its cell") {
    try {
        from_csv("1,2\n-1,4\n5,6\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("(2,1)") != std::string::npos);
    }
}

TEST_CASE("parse failure reports its cell") {
    try {
        from_csv("1,2\n3,4\n5,x\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("(3,2)") != std::string::npos);
    }
}

TEST_CASE("all-zero row is removed and recorded") {
    const DataMatrix m = from_csv("1,2\n0,0\n5,6\n");
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    REQUIRE(m.removed_rows.size() == 1);
    CHECK(m.removed_rows[0] == "2");
    CHECK(m.values(1, 0) == 5.0);
}

TEST_CASE("labeled rows keep their labels through zero-row removal") {
    const DataMatrix m = from_csv("id,s1,s2\ng1,1,2\ng2,0,0\ng3,5,6\n");
    CHECK(m.rows() == 2);
    REQUIRE(m.removed_rows.size() == 1);
    CHECK(m.removed_rows[0] == "g2");
    REQUIRE(m.row_labels.size() == 2);
    CHECK(m.row_labels[1] == "g3");
    REQUIRE(m.col_labels.size() == 2);
    CHECK(m.col_labels[0] == "s1");
}

TEST_CASE("header row only") {
    const DataMatrix m = from_csv("s1,s2,s3\n1,2,3\n4,5,6\n");
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m.col_labels.size() == 3);
    CHECK(m.row_labels.empty());
}

TEST_CASE("tsv parses") {
    std::istringstream in("1\t2\n3\t4\n");
    const DataMatrix m = parse_matrix(in, TableFormat::tsv);
    CHECK(m.rows() == 2);
    CHECK(m.values(1, 1) == 4.0);
}

TEST_CASE("empty after zero-row removal is an error") {
    CHECK_THROWS_AS(from_csv("0,0\n0,0\n"), DataError);
}

TEST_CASE("write then load reproduces values bit-exactly") {
    Rng rng(20240601);
    for (int rep = 0; rep < 20; ++rep) {
        DataMatrix m;
        m.values.resize(5, 4);
        for (Index j = 0; j < 4; ++j)
            for (Index i = 0; i < 5; ++i) {
                // spread over many magnitudes, including 12-significant-digit
                // decimals and exact integers
                const double mag = std::pow(10.0, rng.uniform(-6.0, 6.0));
                m.values(i, j) = rep % 2 == 0 ? std::floor(rng.uniform(0, 1000))
                                              : rng.uniform(0.0, mag);
            }
        m.values(0, 0) = 1.0;  // keep row 0 nonzero
        if (rep % 3 == 0) {
            for (Index i = 0; i < 5; ++i) m.row_labels.push_back("r" + std::to_string(i));
            for (Index j = 0; j < 4; ++j) m.col_labels.push_back("c" + std::to_string(j));
        }
        const TableFormat fmt = rep % 2 == 0 ? TableFormat::csv : TableFormat::tsv;
        std::ostringstream out;
        write_matrix(m, out, fmt);
        std::istringstream in(out.str());
        const DataMatrix back = parse_matrix(in, fmt);
        REQUIRE(back.rows() == m.rows());
        REQUIRE(back.cols() == m.cols());
        for (Index j = 0; j < 4; ++j)
            for (Index i = 0; i < 5; ++i)
                CHECK(std::memcmp(&back.values(i, j), &m.values(i, j), sizeof(double)) == 0);
        CHECK(back.row_labels == m.row_labels);
        CHECK(back.col_labels == m.col_labels);
    }
}

TEST_CASE("zero-row removal is idempotent") {
    DataMatrix m = from_csv("1,2\n0,0\n5,6\n");
    const DataMatrix again = remove_zero_rows(m);
    CHECK(again.rows() == m.rows());
    CHECK(again.removed_rows == m.removed_rows);
}

TEST_CASE("validate fills k_max from the rank cap") {
    DataMatrix m;
    m.values = Matrix::Ones(100, 100);
    SelectionConfig cfg;
    const SelectionConfig out = validate(cfg, m);
    CHECK(out.k_max == 49);
    CHECK(out.alpha == 0.1);
    CHECK(out.bootstrap_size == 50);
    CHECK(out.starts == 50);
}

TEST_CASE("validate cap for 1864x131") {
    DataMatrix m;
    m.values = Matrix::Ones(1864, 131);
    SelectionConfig cfg;
    CHECK(validate(cfg, m).k_max == 121);
}

TEST_CASE("validate rejects bad fields") {
    DataMatrix m;
    m.values = Matrix::Ones(30, 20);
    SelectionConfig cfg;
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(validate(cfg, m), std::invalid_argument);
    cfg.alpha = 0.1;
    cfg.k_start = 50;
    CHECK_THROWS_AS(validate(cfg, m), std::invalid_argument);
    cfg.k_start = 1;
    cfg.bootstrap_size = 5;
    CHECK_THROWS_AS(validate(cfg, m), std::invalid_argument);
}

TEST_CASE("validate clamps an oversized k_max") {
    DataMatrix m;
    m.values = Matrix::Ones(30, 20);
    SelectionConfig cfg;
    cfg.k_max = 1000;
    CHECK(validate(cfg, m).k_max == max_rank_cap(30, 20));
}
