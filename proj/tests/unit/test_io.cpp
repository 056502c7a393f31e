#include <filesystem>

#include <gtest/gtest.h>

#include "nocutoff/config.hpp"
#include "nocutoff/io.hpp"

using namespace nocutoff;
namespace fs = std::filesystem;

TEST(Csv, QuotingAndPrecision) {
    EXPECT_EQ(io::csv_field("plain"), "plain");
    EXPECT_EQ(io::csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(io::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(std::stod(io::format_double(1.0 / 3.0)), 1.0 / 3.0);
    io::CsvWriter w({"t", "name"});
    w.row(0.5, std::string("x,y"));
    EXPECT_EQ(w.str(), "t,name\r\n0.5,\"x,y\"\r\n");
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
    const fs::path dir = fs::temp_directory_path() / "nocutoff_io_test";
    fs::remove_all(dir);
    io::write_atomic(dir / "a.txt", "hello");
    EXPECT_EQ(io::read_file(dir / "a.txt"), "hello");
    EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
    fs::remove_all(dir);
}

TEST(RunConfig, JsonRoundTripAndDefaults) {
    RunConfig c;
    c.gamma = 0.6;
    c.seed = 99;
    c.levels = {0.3, 0.1};
    RunConfig d;
    d.merge_json(c.to_json());
    EXPECT_EQ(d.gamma, 0.6);
    EXPECT_EQ(d.seed, 99u);
    EXPECT_EQ(d.levels, c.levels);
    EXPECT_EQ(c.to_json().dump(), d.to_json().dump());
    const Json def = RunConfig::defaults_document();
    EXPECT_EQ(def["simulation"]["n_particles"], 10000);
    EXPECT_EQ(def["simulation"]["replicas"], 32);
    EXPECT_TRUE(def.contains("units"));
}

TEST(RunConfig, ValidationNamesTheViolation) {
    RunConfig c;
    c.subcommand = "simulate";
    c.epsilon = 0.5;
    try {
        c.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("epsilon"), std::string::npos);
    }
    RunConfig bad;
    bad.subcommand = "simulate";
    bad.initial_law = "point_mass";
    EXPECT_THROW(bad.validate(), ConfigError);
    RunConfig wrong_type;
    EXPECT_THROW(wrong_type.merge_json(Json::parse(R"({"kernel": {"gamma": "high"}})")), ConfigError);
}
