#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "support/helpers.hpp"
#include "threatgeo/extract.hpp"

using namespace threatgeo;
using namespace threatgeo::extract;
using testsupport::TestRng;

namespace {

const char* kFig1Description =
    "Denmark suffered its largest cyberattack on record when Russian hackers hit twenty-two "
    "Danish power companies.";
const char* kFig1Body =
    R"({"country_of_origin":["Russia"],"country_of_target":["Denmark"],"energy_related":true})";

RawRecord record_for(const std::string& id, const std::string& description) {
    RawRecord r;
    r.ref = {"test", id};
    r.description = description;
    return r;
}

BackendConfig fast_config(double delay = 0.0) {
    BackendConfig c;
    c.model_id = "mock";
    c.inter_call_delay_s = delay;
    c.max_retries = 2;
    return c;
}

io::MetaHeader test_meta() { return {"runid0000001", 0, "cfg0"}; }

std::function<std::string()> fixed_clock() {
    return [] { return std::string("1970-01-01T00:00:00Z"); };
}

}  // namespace

TEST_CASE("build_prompt carries fields in schema order plus the description") {
    auto schema = ExtractionSchema::default_for("energy");
    std::string prompt = build_prompt(schema, kFig1Description);

    auto pos_origin = prompt.find("country_of_origin");
    auto pos_target = prompt.find("country_of_target");
    auto pos_flag = prompt.find("energy_related");
    REQUIRE(pos_origin != std::string::npos);
    REQUIRE(pos_target != std::string::npos);
    REQUIRE(pos_flag != std::string::npos);
    CHECK(pos_origin < pos_target);
    CHECK(pos_target < pos_flag);

    CHECK(prompt.find(kFig1Description) != std::string::npos);  // verbatim
    CHECK(prompt.find("energy") != std::string::npos);
    CHECK(prompt.find("list of strings") != std::string::npos);
    CHECK(prompt.find("boolean") != std::string::npos);

    // Pure function: identical inputs, identical prompt.
    CHECK(prompt == build_prompt(schema, kFig1Description));
}

TEST_CASE("build_prompt rejects empty schema and blank descriptions") {
    ExtractionSchema empty;
    CHECK_THROWS_AS(build_prompt(empty, "text"), std::invalid_argument);
    auto schema = ExtractionSchema::default_for();
    CHECK_THROWS_AS(build_prompt(schema, "   \n"), std::invalid_argument);
}

TEST_CASE("swapping the domain keyword renames only the flag field") {
    auto schema = ExtractionSchema::default_for("automotive");
    std::string prompt = build_prompt(schema, "Some incident.");
    CHECK(prompt.find("automotive_related") != std::string::npos);
    CHECK(prompt.find("energy_related") == std::string::npos);
    CHECK(prompt.find("country_of_origin") != std::string::npos);
    CHECK(prompt.find("country_of_target") != std::string::npos);
}

TEST_CASE("extra prompt examples are appended verbatim") {
    auto schema = ExtractionSchema::default_for();
    schema.extra_examples = {"{\"country_of_origin\":[\"X\"]}"};
    CHECK(build_prompt(schema, "desc").find("{\"country_of_origin\":[\"X\"]}") !=
          std::string::npos);
}

TEST_CASE("parse_response accepts the Fig-1-shaped object") {
    auto schema = ExtractionSchema::default_for();
    auto result = parse_response(schema, kFig1Body);
    REQUIRE(std::holds_alternative<ParsedFields>(result));
    const auto& fields = std::get<ParsedFields>(result);
    CHECK(std::get<std::vector<std::string>>(*fields.find("country_of_origin")) ==
          std::vector<std::string>{"Russia"});
    CHECK(std::get<std::vector<std::string>>(*fields.find("country_of_target")) ==
          std::vector<std::string>{"Denmark"});
    CHECK(std::get<bool>(*fields.find("energy_related")) == true);
}

TEST_CASE("parse_response failure modes") {
    auto schema = ExtractionSchema::default_for();
    auto err = [&](std::string_view body) {
        auto r = parse_response(schema, body);
        REQUIRE(std::holds_alternative<ParseError>(r));
        return std::get<ParseError>(r).reason;
    };

    CHECK(err("") == "empty response");
    CHECK(err("   ") == "empty response");
    CHECK(err("not json at all") == "malformed object text");
    CHECK(err("[1,2]") == "response is not an object");
    CHECK(err(R"({"country_of_origin":"Russia","country_of_target":["Denmark"],"energy_related":true})") ==
          "type mismatch: country_of_origin");
    CHECK(err(R"({"country_of_origin":["Russia"],"country_of_target":["Denmark"]})") ==
          "missing field: energy_related");
    CHECK(err(R"({"country_of_origin":["Russia"],"country_of_target":["Denmark"],"energy_related":true,"extra":1})") ==
          "unexpected field: extra");
    CHECK(err(R"({"country_of_origin":["Russia"],"country_of_target":["Denmark"],"energy_related":"yes"})") ==
          "type mismatch: energy_related");
    CHECK(err(R"({"country_of_origin":[1],"country_of_target":[],"energy_related":true})") ==
          "type mismatch: country_of_origin");
}

TEST_CASE("empty country lists are a legal ok result") {
    auto schema = ExtractionSchema::default_for();
    auto result = parse_response(
        schema, R"({"country_of_origin":[],"country_of_target":[],"energy_related":false})");
    CHECK(std::holds_alternative<ParsedFields>(result));
}

TEST_CASE("parse_response after serialize_fields is the identity") {
    TestRng rng(77);
    auto schema = ExtractionSchema::default_for();
    std::vector<std::string> countries = {"Russia", "China", "United States", "Denmark", "Iran"};
    for (int it = 0; it < 100; ++it) {
        ParsedFields fields;
        std::vector<std::string> origins, targets;
        for (size_t i = rng.below(3); i-- > 0;) origins.push_back(rng.pick(countries));
        for (size_t i = rng.below(3); i-- > 0;) targets.push_back(rng.pick(countries));
        fields.values.emplace_back("country_of_origin", origins);
        fields.values.emplace_back("country_of_target", targets);
        fields.values.emplace_back("energy_related", rng.chance(0.5));

        auto round = parse_response(schema, serialize_fields(schema, fields));
        REQUIRE(std::holds_alternative<ParsedFields>(round));
        const auto& got = std::get<ParsedFields>(round);
        CHECK(std::get<std::vector<std::string>>(*got.find("country_of_origin")) == origins);
        CHECK(std::get<std::vector<std::string>>(*got.find("country_of_target")) == targets);
        CHECK(std::get<bool>(*got.find("energy_related")) ==
              std::get<bool>(*fields.find("energy_related")));
    }
}

TEST_CASE("extract_one maps mock responses into records") {
    auto schema = ExtractionSchema::default_for();

    SUBCASE("deterministic mock returns the Fig-1 object") {
        MockBackend mock;
        mock.add_response("Denmark suffered", kFig1Body);
        ExtractPipeline pipeline(mock, fast_config(), schema);
        pipeline.set_clock(fixed_clock());
        auto rec = pipeline.extract_one(record_for("r1", kFig1Description));
        CHECK(rec.status == ExtractStatus::ok);
        CHECK(rec.origin_countries == std::vector<std::string>{"Russia"});
        CHECK(rec.target_countries == std::vector<std::string>{"Denmark"});
        CHECK(rec.energy_related);
        CHECK(rec.provenance.model_id == "mock");
        CHECK(rec.provenance.timestamp == "1970-01-01T00:00:00Z");
    }

    SUBCASE("garbage body becomes parse_error") {
        MockBackend mock;
        mock.set_default_body("%%% not json %%%");
        ExtractPipeline pipeline(mock, fast_config(), schema);
        auto rec = pipeline.extract_one(record_for("r1", "Some incident."));
        CHECK(rec.status == ExtractStatus::parse_error);
        CHECK_FALSE(rec.error_message.empty());
    }

    SUBCASE("transport errors exhaust retries into backend_error") {
        MockBackend mock;
        mock.add_transport_error("Some incident", "quota exceeded");
        auto config = fast_config();
        config.max_retries = 2;
        ExtractPipeline pipeline(mock, config, schema);
        auto rec = pipeline.extract_one(record_for("r1", "Some incident."));
        CHECK(rec.status == ExtractStatus::backend_error);
        CHECK(mock.call_count() == 3);  // max_retries + 1 attempts
        CHECK(rec.error_message.find("quota exceeded") != std::string::npos);
    }

    SUBCASE("record with blank description never reaches the backend") {
        MockBackend mock;
        mock.set_default_body(kFig1Body);
        ExtractPipeline pipeline(mock, fast_config(), schema);
        auto rec = pipeline.extract_one(record_for("r1", "   "));
        CHECK(rec.status == ExtractStatus::backend_error);
        CHECK(mock.call_count() == 0);
    }
}

namespace {

MockBackend counting_ok_mock() {
    MockBackend mock;
    mock.set_handler([](const std::string&) {
        return std::string(
            R"({"country_of_origin":["Russia"],"country_of_target":["Ukraine"],"energy_related":true})");
    });
    return mock;
}

std::vector<RawRecord> numbered_records(size_t n) {
    std::vector<RawRecord> records;
    for (size_t i = 0; i < n; ++i) {
        records.push_back(record_for("r" + std::to_string(100 + i),
                                     "Incident number " + std::to_string(100 + i) + "."));
    }
    return records;
}

}  // namespace

TEST_CASE("run_pipeline checkpoints every record and spaces the calls") {
    testsupport::TempDir tmp;
    auto checkpoint = tmp.path() / "cp.jsonl";
    auto mock = counting_ok_mock();
    ExtractPipeline pipeline(mock, fast_config(0.1), ExtractionSchema::default_for());
    pipeline.set_clock(fixed_clock());

    auto stats = pipeline.run(numbered_records(3), checkpoint, test_meta());
    CHECK(stats.processed == 3);
    CHECK(stats.ok == 3);
    CHECK(stats.backend_calls == 3);

    auto cp = load_checkpoint(checkpoint);
    CHECK(cp.size() == 3);

    // 3 calls -> 2 inter-call gaps, each at least the configured delay.
    REQUIRE(mock.call_starts().size() == 3);
    for (size_t i = 1; i < 3; ++i) {
        auto gap = std::chrono::duration<double>(mock.call_starts()[i] -
                                                 mock.call_starts()[i - 1])
                       .count();
        CHECK(gap >= 0.1);
    }
}

TEST_CASE("rerun over a complete checkpoint makes zero backend calls") {
    testsupport::TempDir tmp;
    auto checkpoint = tmp.path() / "cp.jsonl";
    auto records = numbered_records(4);

    auto mock = counting_ok_mock();
    ExtractPipeline pipeline(mock, fast_config(), ExtractionSchema::default_for());
    pipeline.set_clock(fixed_clock());
    pipeline.run(records, checkpoint, test_meta());
    CHECK(mock.call_count() == 4);

    auto mock2 = counting_ok_mock();
    ExtractPipeline pipeline2(mock2, fast_config(), ExtractionSchema::default_for());
    pipeline2.set_clock(fixed_clock());
    auto stats = pipeline2.run(records, checkpoint, test_meta());
    CHECK(mock2.call_count() == 0);
    CHECK(stats.skipped == 4);
    CHECK(stats.processed == 0);
    CHECK(load_checkpoint(checkpoint).size() == 4);
}

TEST_CASE("interrupting after entry 2 of 5 and rerunning matches an uninterrupted run") {
    testsupport::TempDir tmp;
    auto records = numbered_records(5);
    auto interrupted = tmp.path() / "interrupted.jsonl";
    auto straight = tmp.path() / "straight.jsonl";

    {
        auto mock = counting_ok_mock();
        ExtractPipeline pipeline(mock, fast_config(), ExtractionSchema::default_for());
        pipeline.set_clock(fixed_clock());
        size_t done = 0;
        auto stats = pipeline.run(records, interrupted, test_meta(),
                                  [&] { return done++ >= 2; });
        CHECK(stats.stopped_early);
        CHECK(load_checkpoint(interrupted).size() == 2);
    }
    {
        auto mock = counting_ok_mock();
        ExtractPipeline pipeline(mock, fast_config(), ExtractionSchema::default_for());
        pipeline.set_clock(fixed_clock());
        auto stats = pipeline.run(records, interrupted, test_meta());
        CHECK(stats.processed == 3);
        CHECK(mock.call_count() == 3);
    }
    {
        auto mock = counting_ok_mock();
        ExtractPipeline pipeline(mock, fast_config(), ExtractionSchema::default_for());
        pipeline.set_clock(fixed_clock());
        pipeline.run(records, straight, test_meta());
    }

    // Byte-compare after canonical sort of the lines.
    auto sorted_lines = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        std::sort(lines.begin(), lines.end());
        return lines;
    };
    CHECK(sorted_lines(interrupted) == sorted_lines(straight));
}

TEST_CASE("idempotence: two runs produce equal key->record maps") {
    testsupport::TempDir tmp;
    auto records = numbered_records(6);
    auto a = tmp.path() / "a.jsonl";
    auto b = tmp.path() / "b.jsonl";
    for (const auto& path : {a, b}) {
        auto mock = counting_ok_mock();
        ExtractPipeline pipeline(mock, fast_config(), ExtractionSchema::default_for());
        pipeline.set_clock(fixed_clock());
        pipeline.run(records, path, test_meta());
    }
    auto ca = load_checkpoint(a);
    auto cb = load_checkpoint(b);
    REQUIRE(ca.size() == cb.size());
    for (const auto& [ref, rec] : ca) {
        REQUIRE(cb.count(ref));
        CHECK(cb.at(ref).to_json() == rec.to_json());
    }
}

TEST_CASE("totality: every input record lands exactly once, including failures") {
    testsupport::TempDir tmp;
    auto checkpoint = tmp.path() / "cp.jsonl";
    auto records = numbered_records(5);

    MockBackend mock;
    mock.add_response("Incident number 101", "garbage");
    mock.add_transport_error("Incident number 103", "down");
    mock.set_handler([](const std::string&) {
        return std::string(
            R"({"country_of_origin":[],"country_of_target":[],"energy_related":false})");
    });
    auto config = fast_config();
    config.max_retries = 0;
    ExtractPipeline pipeline(mock, config, ExtractionSchema::default_for());
    pipeline.set_clock(fixed_clock());
    auto stats = pipeline.run(records, checkpoint, test_meta());

    CHECK(stats.ok == 3);
    CHECK(stats.parse_errors == 1);
    CHECK(stats.backend_errors == 1);
    auto cp = load_checkpoint(checkpoint);
    CHECK(cp.size() == 5);
    for (const auto& r : records) CHECK(cp.count(r.ref));
    CHECK(cp.at(records[1].ref).status == ExtractStatus::parse_error);
    CHECK(cp.at(records[3].ref).status == ExtractStatus::backend_error);
    CHECK_FALSE(cp.at(records[3].ref).error_message.empty());
}

TEST_CASE("checkpoint files are readable after any prefix of writes") {
    testsupport::TempDir tmp;
    auto checkpoint = tmp.path() / "cp.jsonl";
    auto mock = counting_ok_mock();
    ExtractPipeline pipeline(mock, fast_config(), ExtractionSchema::default_for());
    pipeline.set_clock(fixed_clock());
    pipeline.run(numbered_records(4), checkpoint, test_meta());

    std::string content = io::read_file(checkpoint);
    // Truncate mid-way through the last line to simulate a torn write.
    std::string torn = content.substr(0, content.size() - 25);
    auto torn_path = tmp.path() / "torn.jsonl";
    std::ofstream(torn_path, std::ios::binary) << torn;

    auto cp = load_checkpoint(torn_path);
    CHECK(cp.size() == 3);  // the torn trailing entry is ignored
}

TEST_CASE("duplicate checkpoint entries keep the first record") {
    testsupport::TempDir tmp;
    auto path = tmp.path() / "dup.jsonl";
    ThreatRecord rec;
    rec.ref = {"test", "r1"};
    rec.status = ExtractStatus::ok;
    rec.origin_countries = {"Russia"};
    rec.target_countries = {};
    rec.energy_related = false;
    ThreatRecord second = rec;
    second.energy_related = true;
    std::ofstream(path) << rec.to_json().dump() << "\n" << second.to_json().dump() << "\n";

    auto cp = load_checkpoint(path);
    REQUIRE(cp.size() == 1);
    CHECK(cp.begin()->second.energy_related == false);
}

TEST_CASE("an unwritable checkpoint path aborts without touching prior state") {
    testsupport::TempDir tmp;
    auto dir_as_checkpoint = tmp.path() / "is_a_directory";
    std::filesystem::create_directories(dir_as_checkpoint);
    auto mock = counting_ok_mock();
    ExtractPipeline pipeline(mock, fast_config(), ExtractionSchema::default_for());
    CHECK_THROWS(pipeline.run(numbered_records(2), dir_as_checkpoint, test_meta()));
    CHECK(std::filesystem::is_directory(dir_as_checkpoint));
}

TEST_CASE("schema files load and validate") {
    auto schema = ExtractionSchema::load(std::string(THREATGEO_DATA_DIR) +
                                         "/default_schema.json");
    REQUIRE(schema.fields.size() == 3);
    CHECK(schema.fields[0].name == "country_of_origin");
    CHECK(schema.fields[0].kind == FieldKind::string_list);
    CHECK(schema.fields[2].kind == FieldKind::boolean);
    CHECK(schema.domain_keyword == "energy");

    ExtractionSchema dup;
    dup.fields = {{"a", FieldKind::boolean, ""}, {"a", FieldKind::boolean, ""}};
    CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
}
