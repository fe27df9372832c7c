#include "dna/errors.hpp"
#include "dna/hashing.hpp"
#include "dna/jsonl.hpp"
#include "dna/mock_server.hpp"
#include "dna/model_io.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>

using namespace dna;
using nlohmann::json;

namespace {

RetryPolicy fast_retry(int attempts = 5) {
    RetryPolicy p;
    p.max_attempts = attempts;
    p.sleep = [](std::chrono::milliseconds) {};
    return p;
}

ModelEndpoint endpoint(const MockServer& s, std::string id) {
    ModelEndpoint e;
    e.model_id = std::move(id);
    e.base_url = s.base_url();
    return e;
}

void write_dataset(const std::filesystem::path& path, int n) {
    std::ofstream out(path);
    for (int i = 0; i < n; ++i) out << json{{"id", "r" + std::to_string(i)}, {"text", "item " + std::to_string(i)}}.dump() << "\n";
}

std::size_t count_path(const std::vector<MockRequest>& log, const std::string& path) {
    std::size_t n = 0;
    for (const auto& r : log) n += r.path == path;
    return n;
}

}  // namespace

TEST_CASE("prompt hashing") {
    std::vector<Prompt> a{{"1", "d", "hello"}, {"2", "d", "world"}};
    auto b = a;
    CHECK(hash_prompts(a) == hash_prompts(b));
    std::swap(b[0], b[1]);
    CHECK(hash_prompts(a) != hash_prompts(b));
    b = a;
    b[1].text = "World";
    CHECK(hash_prompts(a) != hash_prompts(b));
    CHECK(hash_prompts(a).size() == 64);

    CHECK_THROWS_AS(PromptSet::from_prompts({{"1", "d", "x"}, {"1", "d", "y"}}), DomainError);
    CHECK_THROWS_AS(PromptSet::from_prompts({{"", "d", "x"}}), DomainError);
    CHECK_THROWS_AS(PromptSet::from_prompts({{"1", "d", ""}}), DomainError);
}

TEST_CASE("sample_prompts is a deterministic sample without replacement") {
    fixture::TempDir dir;
    write_dataset(dir / "alpha.jsonl", 50);
    write_dataset(dir / "beta.jsonl", 20);
    const std::vector<DatasetSource> src{{dir / "alpha.jsonl", "", "text", "id"}, {dir / "beta.jsonl", "", "text", "id"}};

    const auto a = sample_prompts(src, 10, 7);
    const auto b = sample_prompts(src, 10, 7);
    const auto c = sample_prompts(src, 10, 8);
    REQUIRE(a.size() == 20);
    CHECK(a.prompts == b.prompts);
    CHECK(a.hash == b.hash);
    CHECK(a.hash != c.hash);

    std::set<std::string> texts;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.prompts[i].dataset == (i < 10 ? "alpha" : "beta"));
        CHECK(a.prompts[i].id.rfind(a.prompts[i].dataset + ":r", 0) == 0);
        texts.insert(a.prompts[i].dataset + a.prompts[i].text);
    }
    CHECK(texts.size() == 20);

    CHECK_THROWS_AS(sample_prompts(src, 21, 7), DomainError);
    CHECK_THROWS_AS(sample_prompts(src, 0, 7), DomainError);
    CHECK_THROWS_AS(sample_prompts({}, 3, 7), DomainError);
    CHECK_THROWS_AS(sample_prompts({{dir / "alpha.jsonl", "", "question", "id"}}, 3, 7), ParseError);

    // Save and reload.
    save_prompts(a, dir / "p.jsonl");
    const auto back = load_prompts(dir / "p.jsonl");
    CHECK(back.prompts == a.prompts);
    CHECK(back.hash == a.hash);
}

TEST_CASE("roster parsing") {
    const auto r = parse_roster(R"(
[embedder]
model_id = "emb"
base_url = "http://localhost:9/v1"

[[model]]
model_id = "org/a"
base_url = "https://example.invalid/v1"
api_key_env = "SOME_KEY"
temperature = 0.0
top_p = 1.0
max_length = 64
uses_chat_template = false

[[model]]
model_id = "org/b"
base_url = "http://localhost:9"
)");
    REQUIRE(r.models.size() == 2);
    REQUIRE(r.embedder);
    CHECK(r.embedder->model_id == "emb");
    CHECK(r.models[0].api_key_env == "SOME_KEY");
    CHECK_FALSE(r.models[0].uses_chat_template);
    CHECK(r.models[0].gen_config.max_length == 64);
    CHECK(r.models[0].gen_config.temperature == 0.0);
    CHECK(r.models[1].gen_config.temperature == 0.7);
    CHECK(r.models[1].request_model() == "org/b");

    const auto t = parse_roster("[models.x]\nbase_url = \"http://h\"\n");
    REQUIRE(t.models.size() == 1);
    CHECK(t.models[0].model_id == "x");

    CHECK_THROWS_AS(parse_roster("[[model]]\nmodel_id = \"a\"\nbase_url = \"http://h\"\n[[model]]\nmodel_id = \"a\"\nbase_url = \"http://h\"\n"),
                    DomainError);
    CHECK_THROWS_AS(parse_roster("[[model]]\nmodel_id = \"a\"\nbase_url = \"ftp://h\"\n"), DomainError);
    CHECK_THROWS_AS(parse_roster("[[model]\n"), ParseError);
    CHECK_THROWS_AS(parse_roster("[[model]]\nmodel_id = \"a\"\nbase_url = \"http://h\"\ntop_p = 0.0\n"), DomainError);
}

TEST_CASE("GenConfig hash depends on all three settings") {
    GenConfig a;
    GenConfig b = a;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.temperature = 0.0;
    CHECK(a.hash() != b.hash());
    b = a;
    b.top_p = 0.5;
    CHECK(a.hash() != b.hash());
    b = a;
    b.max_length = 7;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("cache helpers") {
    CHECK(embedding_cache_key("abc") == "sha256:" + sha256_hex("abc"));
    CHECK(cache_file_stem("org/name") == "org__name");
    CHECK(cache_file_stem("plain") == "plain");
}

TEST_CASE("response cache survives reopening and ignores duplicates") {
    fixture::TempDir dir;
    {
        ResponseCache c(dir.path());
        c.put({"org/m", "p1", "first", "cfg"});
        c.put({"org/m", "p1", "second", "cfg"});
        c.put({"org/m", "p1", "other cfg", "cfg2"});
        c.put({"org/m", "p2", "", "cfg"});
    }
    ResponseCache c(dir.path());
    CHECK(c.get("org/m", "p1", "cfg") == std::optional<std::string>("first"));
    CHECK(c.get("org/m", "p1", "cfg2") == std::optional<std::string>("other cfg"));
    CHECK(c.get("org/m", "p2", "cfg") == std::optional<std::string>(""));
    CHECK_FALSE(c.get("org/m", "p3", "cfg"));
    CHECK(std::filesystem::exists(dir / "responses/org__m.jsonl"));
}

TEST_CASE("embedding cache rejects mixed dimensions on load") {
    fixture::TempDir dir;
    {
        EmbeddingCache c(dir.path());
        c.put("e", "k1", {1.0, 2.0});
        CHECK(c.known_dimension("e") == std::optional<std::size_t>(2));
    }
    append_jsonl(dir / "embeddings/e.jsonl", json{{"key", "k2"}, {"values", {1.0, 2.0, 3.0}}});
    EmbeddingCache c(dir.path());
    CHECK_THROWS_AS(c.get("e", "k1"), ParseError);
}

TEST_CASE("generation against the mock endpoint") {
    fixture::TempDir dir;
    MockScript script;
    script.responses["hi"] = "scripted";
    script.model_responses["m2"]["hi"] = "m2 says hi";
    MockServer server(script);
    IoOptions opt;
    opt.cache_dir = dir / "cache";
    opt.retry = fast_retry();
    ModelIo io(opt);

    const auto e1 = endpoint(server, "m1");
    CHECK(io.generate_response(e1, {"a", "d", "hi"}).text == "scripted");
    CHECK(io.generate_response(endpoint(server, "m2"), {"a", "d", "hi"}).text == "m2 says hi");
    CHECK(io.generate_response(e1, {"b", "d", "unscripted"}).text == "unscripted");

    auto raw = e1;
    raw.uses_chat_template = false;
    raw.model_id = "raw";
    CHECK(io.generate_response(raw, {"c", "d", "plain"}).text == "plain");
    CHECK(count_path(server.request_log(), "completions") == 1);

    // Cache hit: no further request.
    const auto before = server.request_log().size();
    CHECK(io.generate_response(e1, {"a", "d", "hi"}).text == "scripted");
    CHECK(server.request_log().size() == before);

    // A different generation config is a different cache key.
    auto hot = e1;
    hot.gen_config.temperature = 1.0;
    io.generate_response(hot, {"a", "d", "hi"});
    CHECK(server.request_log().size() == before + 1);

    // Offline mode turns misses into errors.
    IoOptions off = opt;
    off.offline = true;
    ModelIo offline(off);
    CHECK(offline.generate_response(e1, {"a", "d", "hi"}).text == "scripted");
    CHECK_THROWS_AS(offline.generate_response(e1, {"z", "d", "never"}), RequestError);
}

TEST_CASE("retries on 5xx and 429, not on other 4xx") {
    fixture::TempDir dir;
    IoOptions opt;
    opt.cache_dir = dir / "cache";
    opt.retry = fast_retry(5);

    SUBCASE("three 500s then success") {
        MockScript s;
        s.faults = {{500, 3, "chat"}};
        MockServer server(s);
        ModelIo io(opt);
        CHECK(io.generate_response(endpoint(server, "m"), {"p", "d", "x"}).text == "x");
        const auto log = server.request_log();
        REQUIRE(log.size() == 4);
        CHECK(log[0].status == 500);
        CHECK(log[3].status == 200);
    }
    SUBCASE("one 429 then success") {
        MockScript s;
        s.faults = {{429, 1, "any"}};
        MockServer server(s);
        ModelIo io(opt);
        CHECK(io.generate_response(endpoint(server, "m"), {"p", "d", "x"}).text == "x");
        CHECK(server.request_log().size() == 2);
    }
    SUBCASE("400 is permanent") {
        MockScript s;
        s.faults = {{400, 1, "any"}};
        MockServer server(s);
        ModelIo io(opt);
        try {
            io.generate_response(endpoint(server, "m"), {"p", "d", "x"});
            FAIL("expected RequestError");
        } catch (const RequestError& e) {
            CHECK(e.status() == 400);
            CHECK_FALSE(e.retriable());
        }
        CHECK(server.request_log().size() == 1);
    }
    SUBCASE("retries exhausted") {
        MockScript s;
        s.faults = {{503, 10, "any"}};
        MockServer server(s);
        opt.retry = fast_retry(3);
        ModelIo io(opt);
        CHECK_THROWS_AS(io.generate_response(endpoint(server, "m"), {"p", "d", "x"}), RequestError);
        CHECK(server.request_log().size() == 3);
    }
}

TEST_CASE("retry delays grow and are capped") {
    RetryPolicy p;
    p.jitter = 0.0;
    p.base_delay = std::chrono::milliseconds(100);
    p.max_delay = std::chrono::milliseconds(500);
    CHECK(p.delay_for(1).count() == 100);
    CHECK(p.delay_for(2).count() == 200);
    CHECK(p.delay_for(3).count() == 400);
    CHECK(p.delay_for(4).count() == 500);
    CHECK(p.delay_for(10).count() == 500);
}

TEST_CASE("base url parsing") {
    auto u = parse_base_url("http://127.0.0.1:8080/v1/");
    CHECK(u.scheme_host_port == "http://127.0.0.1:8080");
    CHECK(u.path_prefix == "/v1");
    u = parse_base_url("https://api.example.com");
    CHECK(u.path_prefix == "");
    CHECK_THROWS_AS(parse_base_url("localhost:80"), DomainError);
    CHECK_THROWS_AS(parse_base_url("http://"), DomainError);
}

TEST_CASE("embeddings: cached by text, dimension enforced") {
    fixture::TempDir dir;
    IoOptions opt;
    opt.cache_dir = dir / "cache";
    opt.retry = fast_retry();

    MockScript s8;
    s8.embedding_dim = 8;
    MockServer server8(s8);
    ModelIo io(opt);
    const auto emb = endpoint(server8, "emb");

    const auto v1 = io.embed_text(emb, {"m1", "p1", "c"}, "same text");
    const auto v2 = io.embed_text(emb, {"m2", "p1", "c"}, "same text");
    CHECK(v1.values.size() == 8);
    CHECK(v1.values == v2.values);
    CHECK(v1.values == mock_embedding("same text", 8));
    CHECK(count_path(server8.request_log(), "embeddings") == 1);
    CHECK(v2.source.model_id == "m2");

    MockScript s16;
    s16.embedding_dim = 16;
    MockServer server16(s16);
    auto drift = endpoint(server16, "emb");
    CHECK_THROWS_AS(io.embed_text(drift, {"m1", "p2", "c"}, "new text"), DimensionError);

    // Empty text embeds like any other text.
    CHECK(io.embed_text(emb, {"m3", "p3", "c"}, "").values.size() == 8);
}

TEST_CASE("generate_all keeps prompt order under concurrency") {
    fixture::TempDir dir;
    MockScript s;
    s.latency_ms = 5;
    MockServer server(s);
    IoOptions opt;
    opt.cache_dir = dir / "cache";
    opt.retry = fast_retry();
    opt.max_in_flight = 4;
    ModelIo io(opt);
    std::vector<Prompt> ps;
    for (int i = 0; i < 20; ++i) ps.push_back({"p" + std::to_string(i), "d", "text " + std::to_string(i)});
    const auto set = PromptSet::from_prompts(ps);
    const auto out = io.generate_all(endpoint(server, "m"), set);
    REQUIRE(out.size() == 20);
    for (int i = 0; i < 20; ++i) {
        CHECK(out[i].prompt_id == "p" + std::to_string(i));
        CHECK(out[i].text == "text " + std::to_string(i));
    }
    CHECK(io.http_calls() == 20);
    const auto embs = io.embed_all(endpoint(server, "emb"), out);
    REQUIRE(embs.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(embs[i].values == mock_embedding(out[i].text, 64));
}

TEST_CASE("api key comes from the named environment variable") {
    fixture::TempDir dir;
    MockServer server(MockScript{});
    ::setenv("DNA_TEST_KEY_VAR", "secret-value", 1);
    IoOptions opt;
    opt.cache_dir = dir / "cache";
    opt.retry = fast_retry();
    ModelIo io(opt);
    auto e = endpoint(server, "m");
    e.api_key_env = "DNA_TEST_KEY_VAR";
    CHECK(io.generate_response(e, {"p", "d", "x"}).text == "x");
    // The key never reaches the cache.
    for (const auto& f : std::filesystem::recursive_directory_iterator(dir.path()))
        if (f.is_regular_file()) CHECK(fixture::slurp(f.path()).find("secret-value") == std::string::npos);
    ::unsetenv("DNA_TEST_KEY_VAR");
}
