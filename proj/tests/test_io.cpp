#include <sstream>

#include <gtest/gtest.h>

#include "gendse/dynamics.hpp"
#include "gendse/io.hpp"

using namespace gendse;

TEST(Trace, RoundTripIsByteIdentical) {
    TruthScenario sc;
    sc.smib.fault = FaultKind::VinfDip;
    sc.duration = 2.0;
    const auto tr = io::to_trace(simulate_truth(sc));
    std::ostringstream a;
    io::write_trace(a, tr);
    std::istringstream in(a.str());
    const auto back = io::parse_trace(io::read_table(in));
    std::ostringstream b;
    io::write_trace(b, back);
    EXPECT_EQ(a.str(), b.str());
    ASSERT_TRUE(back.states.has_value());
}

TEST(Trace, JitterNamesRow) {
    std::istringstream in("t,U,phi\n0,1,0\n0.02,1,0\n0.0400001,1,0\n");
    try {
        io::parse_trace(io::read_table(in));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
    }
}

TEST(Trace, RejectsEmptyMissingAndNonFinite) {
    std::istringstream empty("");
    EXPECT_THROW(io::parse_trace(io::read_table(empty)), ValidationError);
    std::istringstream missing("t,U\n0,1\n0.02,1\n");
    EXPECT_THROW(io::parse_trace(io::read_table(missing)), ValidationError);
    std::istringstream nonfinite("t,U,phi\n0,1,0\n0.02,nan,0\n");
    EXPECT_THROW(io::parse_trace(io::read_table(nonfinite)), ValidationError);
}

TEST(Trace, AcceptsTabsAndScientific) {
    std::istringstream in("t\tU\tphi\n0\t1.0e0\t0\n2e-2\t0.99\t1e-3\n");
    const auto tr = io::parse_trace(io::read_table(in));
    ASSERT_EQ(tr.t.size(), 2u);
    EXPECT_DOUBLE_EQ(tr.terminal[1].phi, 1e-3);
}

TEST(Fmt, ShortestRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) EXPECT_EQ(std::stod(io::fmt(v)), v);
    EXPECT_EQ(io::fmt(0.02), "0.02");
}

TEST(Table, DetectsSemicolonAndReportsBadCell) {
    std::istringstream ok("a;b\n1;2\n");
    const auto t = io::read_table(ok);
    EXPECT_EQ(t.header.size(), 2u);
    EXPECT_EQ(t.rows[0][1], 2.0);
    std::istringstream bad("a,b\n1,2\n3,x\n");
    try {
        io::read_table(bad, "f.csv");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("f.csv: row 3"), std::string::npos) << e.what();
    }
    std::istringstream ragged("a,b\n1\n");
    EXPECT_THROW(io::read_table(ragged), ValidationError);
}

TEST(Trace, RejectsDecreasingTimeAndNegativeU) {
    std::istringstream back("t,U,phi\n0,1,0\n-0.02,1,0\n");
    EXPECT_THROW(io::parse_trace(io::read_table(back)), ValidationError);
    std::istringstream neg("t,U,phi\n0,-1,0\n");
    EXPECT_THROW(io::parse_trace(io::read_table(neg)), ValidationError);
    std::istringstream partial("t,U,phi,delta\n0,1,0,0\n");
    EXPECT_THROW(io::parse_trace(io::read_table(partial)), ValidationError);
}

TEST(Trace, MissingFileIsValidationError) { EXPECT_THROW(io::ingest_trace("/nonexistent/trace.csv"), ValidationError); }
