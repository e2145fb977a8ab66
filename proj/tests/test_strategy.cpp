#include <random>

#include <gtest/gtest.h>

#include "newsforge/error.hpp"
#include "newsforge/strategy.hpp"
#include "newsforge/text.hpp"
#include "support.hpp"

using namespace newsforge;

namespace {

const TemplateSet& repo_templates() {
    static const TemplateSet set = TemplateSet::load_directory(testing_support::templates());
    return set;
}

PromptTemplate inline_template(const std::string& text, TemplateRole role = TemplateRole::Generation) {
    PromptTemplate t;
    t.role = role;
    t.system_text = text;
    if (role == TemplateRole::Generation) t.variants[StrategyId::Summary] = {};
    return t;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidArgument;
}

Article source() {
    auto a = testing_support::real_article(testing_support::source_text(1));
    a.id = "src1";
    return a;
}

}  // namespace

TEST(Templates, RepositoryTemplatesLoadAndValidate) {
    const auto& set = repo_templates();
    for (auto s : kAllStrategies) EXPECT_TRUE(set.has_generation(s)) << to_string(s);
    EXPECT_NO_THROW(set.qualification());
    EXPECT_NO_THROW(set.detection());
}

TEST(Templates, StepCountsPerStrategy) {
    const auto& vl = repo_templates().generation(StrategyId::VLPrompt);
    EXPECT_EQ(vl.declared_steps(StrategyId::VLPrompt).size(), 4u);
    EXPECT_EQ(vl.declared_steps(StrategyId::AbRole).size(), 3u);
    EXPECT_EQ(vl.declared_steps(StrategyId::AbSem).size(), 4u);
    EXPECT_EQ(repo_templates().generation(StrategyId::QA).declared_steps(StrategyId::QA).size(), 5u);
}

TEST(Templates, AbRoleDropsRolePlayStep) {
    const auto& vl = repo_templates().generation(StrategyId::VLPrompt);
    const auto full = render_generation_prompt(StrategyId::VLPrompt, vl, source()).system_message;
    const auto ablated = render_generation_prompt(StrategyId::AbRole, vl, source()).system_message;
    EXPECT_NE(full.find("Step 2"), std::string::npos);
    EXPECT_EQ(ablated.find("Step 2"), std::string::npos);
    EXPECT_NE(full.find("cause social panic"), std::string::npos);
    EXPECT_EQ(ablated.find("cause social panic"), std::string::npos);
}

TEST(Templates, AbSemDropsStyleRequirementsOnly) {
    const auto& vl = repo_templates().generation(StrategyId::VLPrompt);
    const auto full = render_generation_prompt(StrategyId::VLPrompt, vl, source()).system_message;
    const auto ablated = render_generation_prompt(StrategyId::AbSem, vl, source()).system_message;
    EXPECT_NE(full.find("writing style"), std::string::npos);
    EXPECT_EQ(ablated.find("writing style"), std::string::npos);
    EXPECT_NE(ablated.find("Step 2"), std::string::npos);
}

// Every ablated prompt is the full prompt with whole lines removed, so its
// lines form a subsequence of the full prompt's lines.
TEST(Templates, AblationsAreLineSubsequences) {
    const auto& vl = repo_templates().generation(StrategyId::VLPrompt);
    const auto full = split_lines(vl.render_text(StrategyId::VLPrompt));
    for (auto s : {StrategyId::AbRole, StrategyId::AbSem}) {
        const auto ablated = split_lines(vl.render_text(s));
        EXPECT_LT(ablated.size(), full.size());
        std::size_t k = 0;
        for (const auto& line : full)
            if (k < ablated.size() && ablated[k] == line) ++k;
        EXPECT_EQ(k, ablated.size()) << to_string(s);
    }
}

TEST(Templates, GenerationRequestShape) {
    const auto req = render_generation_prompt(StrategyId::VLPrompt, repo_templates().generation(StrategyId::VLPrompt),
                                              source());
    EXPECT_DOUBLE_EQ(req.temperature, 0.7);
    ASSERT_EQ(req.user_messages.size(), 1u);
    EXPECT_EQ(req.user_messages[0], source().text);
    EXPECT_EQ(req.system_message.find('{'), std::string::npos);
}

TEST(Templates, QaVariantsDifferInQuestionTarget) {
    const auto& qa = repo_templates().generation(StrategyId::QA);
    const auto a = render_generation_prompt(StrategyId::QA, qa, source()).system_message;
    const auto b = render_generation_prompt(StrategyId::QAS, qa, source()).system_message;
    EXPECT_NE(a, b);
    EXPECT_NE(a.find("the main event"), std::string::npos);
    EXPECT_NE(b.find("specific detail"), std::string::npos);
}

TEST(Templates, RenderErrors) {
    const auto& qa = repo_templates().generation(StrategyId::QA);
    EXPECT_EQ(code_of([&] { render_generation_prompt(StrategyId::VLPrompt, qa, source()); }),
              ErrorCode::StrategyTemplateMismatch);
    auto empty = source();
    empty.text = "  \n ";
    EXPECT_EQ(code_of([&] { render_generation_prompt(StrategyId::QA, qa, empty); }), ErrorCode::EmptySource);
    EXPECT_EQ(code_of([&] { render_qualification_prompt(source(), "   ", repo_templates().qualification()); }),
              ErrorCode::EmptyCandidate);
}

TEST(Templates, MissingPlaceholderListsNames) {
    auto t = inline_template("Write about {topic} for {audience}.");
    try {
        t.render_text(StrategyId::Summary);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingPlaceholder);
        EXPECT_NE(std::string(e.what()).find("{audience}"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("{topic}"), std::string::npos);
    }
    EXPECT_EQ(t.render_text(StrategyId::Summary, {{"topic", "x"}, {"audience", "y"}}), "Write about x for y.");
}

TEST(Templates, BraceEscapes) {
    auto t = inline_template("Use {{json}} like {{\"a\": 1}} here.");
    EXPECT_EQ(t.render_text(StrategyId::Summary), "Use {json} like {\"a\": 1} here.");
    EXPECT_TRUE(t.placeholders().empty());
}

TEST(Templates, StructuralValidation) {
    EXPECT_EQ(code_of([] { inline_template("{#a}x").validate(); }), ErrorCode::TemplateInvalid);
    EXPECT_EQ(code_of([] { inline_template("{#a}{#b}x{/b}{/a}").validate(); }), ErrorCode::TemplateInvalid);
    auto t = inline_template("no steps here");
    t.variants.clear();
    t.variants[StrategyId::VLPrompt] = {};
    t.steps = {{"Step 1", std::nullopt}};
    EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::TemplateInvalid);  // label absent from text
    auto d = inline_template("classify {article}", TemplateRole::Detection);
    EXPECT_EQ(code_of([&] { d.validate(); }), ErrorCode::TemplateInvalid);
    auto r = inline_template("plain");
    r.required_placeholders = {"topic"};
    EXPECT_EQ(code_of([&] { r.validate(); }), ErrorCode::TemplateInvalid);
}

TEST(Templates, VlPromptWithThreeStepsFailsValidation) {
    auto t = inline_template("Step 1 a\nStep 2 b\nStep 3 c\n");
    t.variants.clear();
    t.variants[StrategyId::VLPrompt] = {};
    t.steps = {{"Step 1", std::nullopt}, {"Step 2", std::nullopt}, {"Step 3", std::nullopt}};
    EXPECT_EQ(code_of([&] { t.validate(); }), ErrorCode::TemplateInvalid);
}

TEST(Parsing, VlPromptArticleIsStepFourSection) {
    const auto& vl = repo_templates().generation(StrategyId::VLPrompt);
    const auto out = parse_generation_output(StrategyId::VLPrompt, vl,
                                             testing_support::vlprompt_output(testing_support::kAltered));
    EXPECT_EQ(out.article_text, testing_support::kAltered);
    EXPECT_EQ(out.step_outputs.size(), 4u);
    EXPECT_FALSE(out.answer1);
}

TEST(Parsing, DecoratedHeadingsAreRecognized) {
    const auto& vl = repo_templates().generation(StrategyId::VLPrompt);
    const std::string raw = "**Step 1:** elements\n## Step 2 - role\n- Step 3. changes\n### Step 4:\nThe body.\nMore.";
    const auto out = parse_generation_output(StrategyId::VLPrompt, vl, raw);
    EXPECT_EQ(out.article_text, "The body.\nMore.");
}

TEST(Parsing, Step10IsNotStep1) {
    auto t = inline_template("Step 1 x\nStep 2 y");
    t.steps = {{"Step 1", std::nullopt}, {"Step 2", std::nullopt}};
    const auto out = parse_generation_output(StrategyId::Summary, t, "Step 1: a\nStep 10: b\nStep 2: c");
    EXPECT_EQ(out.step_outputs.at("Step 1"), "a\nStep 10: b");
    EXPECT_EQ(out.article_text, "c");
}

TEST(Parsing, SummaryWithoutHeadingsUsesWholeOutput) {
    const auto& s = repo_templates().generation(StrategyId::Summary);
    EXPECT_EQ(parse_generation_output(StrategyId::Summary, s, "  Just the article.  \n").article_text,
              "Just the article.");
}

TEST(Parsing, RefusalIsUnparseable) {
    const auto& s = repo_templates().generation(StrategyId::Summary);
    EXPECT_EQ(code_of([&] { parse_generation_output(StrategyId::Summary, s, "I'm sorry, I can't help with that."); }),
              ErrorCode::UnparseableOutput);
    EXPECT_EQ(code_of([&] { parse_generation_output(StrategyId::Summary, s, "   "); }), ErrorCode::UnparseableOutput);
}

TEST(Parsing, QaAnswersExtracted) {
    const auto& qa = repo_templates().generation(StrategyId::QA);
    const auto out = parse_generation_output(StrategyId::QA, qa,
                                             testing_support::qa_output("The storm.", "A strike.", "Body text."));
    ASSERT_TRUE(out.answer1 && out.answer2);
    EXPECT_EQ(*out.answer1, "The storm.");
    EXPECT_EQ(*out.answer2, "A strike.");
    EXPECT_EQ(out.article_text, "Body text.");
}

TEST(Parsing, QaAnswerMarkersTolerateSpacingAndCase) {
    const auto& qa = repo_templates().generation(StrategyId::QA);
    const std::string raw = "Step 1: q\nStep 2: **answer 1**: yes\nStep 3: x\nStep 4: body\nStep 5:\nANSWER2 =\n no\n";
    const auto out = parse_generation_output(StrategyId::QAS, qa, raw);
    EXPECT_EQ(out.answer1, "yes");
    EXPECT_EQ(out.answer2, "no");
}

TEST(Parsing, QaMissingAnswer) {
    const auto& qa = repo_templates().generation(StrategyId::QA);
    EXPECT_EQ(code_of([&] { parse_generation_output(StrategyId::QA, qa, "Step 1: q\nAnswer1: a\nStep 4: body"); }),
              ErrorCode::MissingAnswer);
}

TEST(Parsing, QualificationVerdicts) {
    auto v = parse_qualification_output("Yes. The cause was changed.");
    EXPECT_TRUE(v.qualified);
    EXPECT_EQ(v.explanation, "The cause was changed.");
    EXPECT_FALSE(parse_qualification_output("no - only wording differs").qualified);
    EXPECT_TRUE(parse_qualification_output("**YES**, it changed").qualified);
    EXPECT_EQ(code_of([] { parse_qualification_output("Maybe."); }), ErrorCode::AmbiguousVerdict);
    EXPECT_EQ(code_of([] { parse_qualification_output("Yesterday it changed"); }), ErrorCode::AmbiguousVerdict);
    EXPECT_FALSE(parse_qualification_lenient("Perhaps").qualified);
}

TEST(Parsing, DetectionLabels) {
    EXPECT_EQ(parse_detection_output("Fake."), PredictedLabel::Fake);
    EXPECT_EQ(parse_detection_output("This looks real to me"), PredictedLabel::Real);
    EXPECT_EQ(parse_detection_output("unsure"), PredictedLabel::Unparseable);
    EXPECT_EQ(parse_detection_output("fakes abound"), PredictedLabel::Unparseable);
}

TEST(Detection, PromptEmbedsExemplar) {
    auto ex = source();
    auto in = testing_support::real_article("Another piece.");
    in.id = "other";
    const auto req = render_detection_prompt(ex, "fake", in, repo_templates().detection());
    EXPECT_NE(req.system_message.find(ex.text), std::string::npos);
    EXPECT_NE(req.system_message.find("Label: fake"), std::string::npos);
    EXPECT_EQ(req.user_messages, std::vector<std::string>{"Another piece."});
    EXPECT_DOUBLE_EQ(req.temperature, 0.0);
    EXPECT_EQ(code_of([&] { render_detection_prompt(ex, "maybe", in, repo_templates().detection()); }),
              ErrorCode::InvalidLabel);
    EXPECT_EQ(code_of([&] { render_detection_prompt(ex, NewsLabel::Real, ex, repo_templates().detection()); }),
              ErrorCode::SelfExampleError);
}

// Rendering a random step layout, answering each step, and parsing the
// answer recovers the last section as the article.
TEST(Parsing, RenderParseClosureOnRandomLayouts) {
    std::mt19937 rng(1234);
    for (int round = 0; round < 200; ++round) {
        const int n = 1 + static_cast<int>(rng() % 6);
        PromptTemplate t;
        t.role = TemplateRole::Generation;
        t.variants[StrategyId::Summary] = {};
        std::string text = "Intro\n", output;
        std::vector<std::string> bodies;
        for (int i = 1; i <= n; ++i) {
            const std::string label = "Part " + std::to_string(i);
            t.steps.push_back({label, std::nullopt});
            text += label + ": do {thing}\n";
            bodies.push_back("body " + std::to_string(rng() % 1000) + " words\nsecond line " + std::to_string(i));
            output += (rng() % 2 ? "**" : "") + label + ":\n" + bodies.back() + "\n";
        }
        t.system_text = text;
        t.defaults["thing"] = "it";
        ASSERT_NO_THROW(t.validate());
        const auto out = parse_generation_output(StrategyId::Summary, t, output);
        EXPECT_EQ(out.article_text, bodies.back());
        EXPECT_EQ(out.step_outputs.size(), static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) EXPECT_EQ(out.step_outputs.at("Part " + std::to_string(i + 1)), bodies[i]);
    }
}
