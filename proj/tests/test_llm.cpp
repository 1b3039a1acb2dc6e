#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "cxr/error.hpp"
#include "cxr/llm/backend.hpp"
#include "cxr/llm/prompt_document.hpp"
#include "cxr/llm/report.hpp"
#include "cxr/service/ablation.hpp"
#include "prompt_fixture.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace cxr;
using namespace cxr::llm;

namespace {

const data::RegionVocabulary& regions() { return data::RegionVocabulary::builtin(); }

using cxr::testing::fixture;
using cxr::testing::golden_path;
using cxr::testing::read_file;

std::set<std::string> section_regions(const StructuredReport& r) {
  std::set<std::string> out;
  for (const auto& s : r.sections) out.insert(s.region_name);
  return out;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) setenv(name, value, 1); else unsetenv(name);
  }
  ~ScopedEnv() {
    if (old_) setenv(name_, old_->c_str(), 1); else unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

// Chat-completion stand-in on a loopback port.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

  std::atomic<int> hits{0};
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteConfig fast_config(const std::string& endpoint) {
  RemoteConfig c;
  c.endpoint = endpoint;
  c.model = "test-model";
  c.timeout = std::chrono::milliseconds(2000);
  c.initial_backoff = std::chrono::milliseconds(1);
  return c;
}

}  // namespace

TEST(AssemblePrompt, GoldenDocumentsForEveryPreset) {
  const auto f = fixture();
  const bool update = std::getenv("CXR_UPDATE_GOLDEN") != nullptr;
  for (const char* preset : service::kPresetNames) {
    const auto doc = assemble_prompt(f.input, service::AblationSpec::preset(preset).prompt_mask());
    const auto path = golden_path(preset);
    if (update) {
      std::filesystem::create_directories(path.parent_path());
      std::ofstream(path, std::ios::binary) << doc.text();
    }
    const std::string golden = read_file(path);
    ASSERT_FALSE(golden.empty()) << "missing " << path;
    EXPECT_EQ(doc.text(), golden) << "preset " << preset;
  }
}

TEST(AssemblePrompt, DistinctMasksGiveDistinctDocuments) {
  const auto f = fixture();
  std::set<std::string> docs;
  for (int bits = 0; bits < 16; ++bits) {
    const PromptMask m{bool(bits & 1), bool(bits & 2), bool(bits & 4), bool(bits & 8)};
    docs.insert(assemble_prompt(f.input, m).text());
  }
  EXPECT_EQ(docs.size(), 16u);
}

TEST(AssemblePrompt, SectionOrderAndMasking) {
  const auto f = fixture();
  const auto full = assemble_prompt(f.input, {});
  ASSERT_EQ(full.sections.size(), 4u);
  EXPECT_EQ(full.sections[0].header, kInstructionHeader);
  EXPECT_EQ(full.sections[1].header, kSentencesHeader);
  EXPECT_EQ(full.sections[2].header, kAnatomyHeader);
  EXPECT_EQ(full.sections[3].header, kContextHeader);
  EXPECT_EQ(full.sections[0].lines, std::vector<std::string>{kDefaultInstruction});

  const auto no_ctx = assemble_prompt(f.input, {true, true, true, false});
  EXPECT_EQ(no_ctx.text().find("## Clinical context"), std::string::npos);

  const auto only_cy = assemble_prompt(f.input, {true, false, false, false});
  EXPECT_EQ(only_cy.sections.size(), 2u);
}

TEST(AssemblePrompt, SentencesFollowLocationPrompts) {
  const auto f = fixture();
  const auto full = assemble_prompt(f.input, {});
  std::size_t selected = 0;
  for (bool s : f.input.selected) selected += s;
  EXPECT_EQ(full.find(kSentencesHeader)->lines.size(), selected);
  EXPECT_EQ(selected, 5u);  // four selected plus the coerced aortic arch

  const auto no_p1 = assemble_prompt(f.input, {true, false, true, true});
  EXPECT_EQ(no_p1.find(kSentencesHeader)->lines.size(), 29u);
  EXPECT_EQ(no_p1.find(kSentencesHeader)->lines[0], "- right lung: The right lung is unremarkable.");
}

TEST(AssemblePrompt, UnavailableRegionsAreDropped) {
  auto f = fixture();
  f.input.available.assign(29, true);
  f.input.available[*regions().index_of("left lung")] = false;
  const auto doc = assemble_prompt(f.input, {true, false, false, false});
  EXPECT_EQ(doc.find(kSentencesHeader)->lines.size(), 28u);
  EXPECT_EQ(doc.text().find("left lower lobe"), std::string::npos);
}

TEST(AssemblePrompt, EmptyContextHasNoSection) {
  auto f = fixture();
  f.input.context = {};
  EXPECT_EQ(assemble_prompt(f.input, {}).find(kContextHeader), nullptr);
}

TEST(MockLlm, ReportCoversExactlyLocatedRegions) {
  const auto f = fixture();
  const auto report = MockLlm().generate(assemble_prompt(f.input, {}));
  std::set<std::string> expected;
  for (std::size_t r = 0; r < 29; ++r)
    if (f.conversion.selected[r]) expected.insert(regions().name(r));
  EXPECT_EQ(section_regions(report), expected);
  ASSERT_NE(report.find("left lung"), nullptr);
  EXPECT_TRUE(report.find("left lung")->abnormal);
  EXPECT_TRUE(report.find("aortic arch")->abnormal);
  EXPECT_FALSE(report.find("spine")->abnormal);
  ASSERT_TRUE(report.context_summary.has_value());
  EXPECT_NE(report.context_summary->find("Cough for three weeks."), std::string::npos);
  // region-vocabulary order
  std::vector<std::size_t> ids;
  for (const auto& s : report.sections) ids.push_back(*regions().index_of(s.region_name));
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
}

TEST(MockLlm, WithoutLocationPromptsKeepsEverySentence) {
  const auto f = fixture();
  const auto report = MockLlm().generate(assemble_prompt(f.input, {true, false, true, true}));
  EXPECT_EQ(report.sections.size(), 29u);
  EXPECT_TRUE(report.find("aortic arch")->abnormal);
  const auto bare = MockLlm().generate(assemble_prompt(f.input, {false, false, false, false}));
  EXPECT_EQ(bare.sections.size(), 29u);
  for (const auto& s : bare.sections) EXPECT_FALSE(s.abnormal);
  EXPECT_FALSE(bare.context_summary.has_value());
}

TEST(MockLlm, DeduplicatesWithinSectionsOnly) {
  auto f = fixture();
  const std::size_t rl = *regions().index_of("right lung"), ll = *regions().index_of("left lung");
  f.input.sentences[rl] = "Clear lung. Clear lung.";
  f.input.sentences[ll] = "Clear lung.";
  const auto report = MockLlm().generate(assemble_prompt(f.input, {}));
  EXPECT_EQ(report.find("right lung")->text, "Clear lung.");
  EXPECT_EQ(report.find("left lung")->text, "Clear lung.");
  EXPECT_EQ(deduplicate_sentences("A b. A b. C d! A b."), "A b. C d!");
}

TEST(MockLlm, P2AbnormalLineFlagsSection) {
  AssemblyInput in;
  in.sentences.assign(29, "Normal.");
  in.selected.assign(29, false);
  in.selected[*regions().index_of("spine")] = true;
  in.anatomy.location = {"Include a finding for the spine."};
  in.anatomy.abnormality = {"The spine is definitely abnormal."};
  const auto report = MockLlm().generate(assemble_prompt(in, {}));
  ASSERT_EQ(report.sections.size(), 1u);
  EXPECT_EQ(report.sections[0].region_name, "spine");
  EXPECT_TRUE(report.sections[0].abnormal);
}

TEST(ParseReport, RoundTripsMockOutput) {
  const auto f = fixture();
  for (const char* preset : service::kPresetNames) {
    const auto report = MockLlm().generate(assemble_prompt(f.input, service::AblationSpec::preset(preset).prompt_mask()));
    EXPECT_EQ(parse_report(report.raw_text), report) << preset;
    EXPECT_EQ(parse_report(render_report(report)), report);
  }
}

TEST(ParseReport, EmptyTextIsUnstructured) {
  const auto r = parse_report("");
  EXPECT_TRUE(r.sections.empty());
  EXPECT_TRUE(r.unstructured);
}

TEST(ParseReport, FreeTextBecomesSingleSection) {
  const auto r = parse_report("Everything looks fine to me.");
  ASSERT_EQ(r.sections.size(), 1u);
  EXPECT_EQ(r.sections[0].region_name, kUnstructuredRegion);
  EXPECT_TRUE(r.unstructured);
}

TEST(ParseReport, HeadingsAreCaseInsensitiveAndLongestMatch) {
  const auto r = parse_report("Cardiac silhouette: enlarged.");
  ASSERT_EQ(r.sections.size(), 1u);
  EXPECT_EQ(r.sections[0].region_name, "cardiac silhouette");
  EXPECT_EQ(r.sections[0].text, "enlarged.");

  const auto two = parse_report("Patient with cough.\nRIGHT LOWER LUNG ZONE [abnormal]: opacity.\nRight lung: clear.");
  ASSERT_EQ(two.sections.size(), 2u);
  EXPECT_EQ(two.sections[0].region_name, "right lower lung zone");
  EXPECT_TRUE(two.sections[0].abnormal);
  EXPECT_EQ(two.sections[1].region_name, "right lung");
  EXPECT_EQ(two.context_summary, std::optional<std::string>("Patient with cough."));
}

TEST(RemoteLlm, MissingKeyFailsBeforeNetwork) {
  ScopedEnv env(kApiKeyEnv, nullptr);
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 200; });
  RemoteLlm llm(fast_config(stub.endpoint()));
  EXPECT_THROW(llm.complete(assemble_prompt(fixture().input, {})), ConfigError);
  EXPECT_EQ(stub.hits.load(), 0);
}

TEST(RemoteLlm, PassesReplyThroughVerbatim) {
  ScopedEnv env(kApiKeyEnv, "sk-test-123");
  const std::string reply = "Right lung: clear.\nSpine [abnormal]: fracture.";
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}};
    res.set_content(j.dump(), "application/json");
  });
  RemoteLlm llm(fast_config(stub.endpoint()));
  const auto doc = assemble_prompt(fixture().input, {});
  EXPECT_EQ(llm.complete(doc), reply);
  EXPECT_EQ(stub.hits.load(), 1);
  EXPECT_EQ(stub.last_auth, "Bearer sk-test-123");
  const auto body = nlohmann::json::parse(stub.last_body);
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"].get<std::string>().rfind(kDefaultInstruction, 0), 0u);
  EXPECT_EQ(body["messages"][1]["content"], doc.body_text());
}

TEST(RemoteLlm, RetriesServerErrorsThenFails) {
  ScopedEnv env(kApiKeyEnv, "sk-test");
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  RemoteLlm llm(fast_config(stub.endpoint()));
  try {
    llm.complete(assemble_prompt(fixture().input, {}));
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.status(), 500);
    EXPECT_EQ(std::string(e.what()).find("sk-test"), std::string::npos);
  }
  EXPECT_EQ(stub.hits.load(), 3);
}

TEST(RemoteLlm, RecoversAfterTransientFailure) {
  ScopedEnv env(kApiKeyEnv, "sk-test");
  std::atomic<int> calls{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
  });
  EXPECT_EQ(RemoteLlm(fast_config(stub.endpoint())).complete(assemble_prompt(fixture().input, {})), "ok");
  EXPECT_EQ(stub.hits.load(), 2);
}

TEST(RemoteLlm, ClientErrorIsNotRetried) {
  ScopedEnv env(kApiKeyEnv, "sk-test");
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  EXPECT_THROW(RemoteLlm(fast_config(stub.endpoint())).complete(assemble_prompt(fixture().input, {})), TransportError);
  EXPECT_EQ(stub.hits.load(), 1);
}

TEST(RemoteLlm, SlowServerTimesOut) {
  ScopedEnv env(kApiKeyEnv, "sk-test");
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content(R"({"choices":[{"message":{"content":"late"}}]})", "application/json");
  });
  auto cfg = fast_config(stub.endpoint());
  cfg.timeout = std::chrono::milliseconds(100);
  cfg.max_attempts = 2;
  EXPECT_THROW(RemoteLlm(cfg).complete(assemble_prompt(fixture().input, {})), TimeoutError);
}

TEST(RemoteLlm, BadEndpointIsConfigError) {
  EXPECT_THROW(RemoteLlm(fast_config("not a url")), ConfigError);
}
