#include <gtest/gtest.h>

#include "spatial/error.hpp"
#include "spatial/layout.hpp"
#include "spatial/prompting.hpp"
#include "spatial/random.hpp"

namespace spatial {
namespace {

constexpr const char* kGardenText =
    "Objects: [('a gray cat', [51, 67, 271, 324]), ('an orange dog', [302, 119, 211, 228])]\n"
    "Background prompt: A realistic photo of a garden with";
constexpr const char* kSceneText =
    "Objects: [('a dog', [3, 122, 212, 250]), ('a tree', [287, 31, 220, 341])]\n"
    "Background prompt: A realistic photograph of a scene";

Layout garden() {
  return Layout{{{"a gray cat", {51, 67, 271, 324}}, {"an orange dog", {302, 119, 211, 228}}},
                "A realistic photo of a garden with",
                {}};
}

Layout scene() { return parse_layout_response(kSceneText); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

TEST(ParseCaption, CaptionFormatBox) {
  const auto spec =
      parse_caption("A realistic photo of a garden with a gray cat on the left and an orange dog on the right.");
  EXPECT_EQ(spec, (CaptionSpec{"A realistic photo of a garden", "a gray cat", "an orange dog"}));
}

TEST(ParseCaption, MirroredOrderIsNormalized) {
  const auto spec = parse_caption(
      "A realistic photo of a wooden table with a book on the right and a teddy bear on the left.");
  EXPECT_EQ(spec, (CaptionSpec{"A realistic photo of a wooden table", "a teddy bear", "a book"}));
}

TEST(ParseCaption, AcceptsLabelAndMissingPeriod) {
  const auto spec = parse_caption("[Caption]: A photo of a beach with a red ball on the left and a blue kite on the right");
  EXPECT_EQ(spec, (CaptionSpec{"A photo of a beach", "a red ball", "a blue kite"}));
}

TEST(ParseCaption, GrammarMismatch) {
  EXPECT_EQ(code_of([] { parse_caption("A cat next to a dog."); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_caption("with a cat on the left and a dog on the right."); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_caption("A garden with a cat on the left and a dog on the left."); }),
            ErrorCode::ParseError);
}

TEST(ParseCaption, RenderRoundTrip) {
  const CaptionSpec spec{"An oil painting of a city street", "a red car", "an old bench"};
  EXPECT_EQ(render_caption(spec), "An oil painting of a city street with a red car on the left and an old bench on the right.");
  EXPECT_EQ(parse_caption(render_caption(spec)), spec);
}

TEST(ParseLayout, AppendixExample) {
  const Layout l = scene();
  ASSERT_EQ(l.objects.size(), 2u);
  EXPECT_EQ(l.objects[0], (ObjectAnnotation{"a dog", {3, 122, 212, 250}}));
  EXPECT_EQ(l.objects[1], (ObjectAnnotation{"a tree", {287, 31, 220, 341}}));
  EXPECT_EQ(l.background_prompt, "A realistic photograph of a scene");
}

TEST(ParseLayout, LayoutFormatBoxParsesButFailsValidation) {
  // The dog box ends at x = 513 and overlaps the cat box.
  const Layout l = parse_layout_text(kGardenText);
  EXPECT_EQ(l, garden());
  EXPECT_EQ(validate_layout(l), (std::vector<Violation>{Violation::OutOfBounds, Violation::Overlap}));
  try {
    parse_layout_response(kGardenText);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
    EXPECT_EQ(e.violations(), (std::vector<std::string>{"OUT_OF_BOUNDS", "OVERLAP"}));
  }
}

TEST(ParseLayout, EmptyObjectListIsValidationError) {
  try {
    parse_layout_response("Objects: []\nBackground prompt: x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError);
    EXPECT_EQ(e.violations(), std::vector<std::string>{"BAD_OBJECT_COUNT"});
  }
}

TEST(ParseLayout, LenientQuotesAndLabels) {
  const Layout expected = scene();
  EXPECT_EQ(parse_layout_response("[Objects]: [(\"a dog\", [3, 122, 212, 250]), (\"a tree\", [287, 31, 220, 341])]\n"
                                  "[Background prompt]:: A realistic photograph of a scene"),
            expected);
  EXPECT_EQ(parse_layout_response("Objects: [(‘a dog’, [3,122,212,250]),(‘a tree’,[287,31,220,341])]\n"
                                  "Background prompt: A realistic photograph of a scene\n"),
            expected);
}

TEST(ParseLayout, MalformedInputIsParseError) {
  EXPECT_EQ(code_of([] { parse_layout_text("Objects: [('a dog', [3, 122, 212])]\nBackground prompt: x"); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_layout_text("Objects: [('a dog', [3.5, 122, 212, 20])]\nBackground prompt: x"); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_layout_text("Objects: [('a dog', [3, 122, 212, 20])]"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_layout_text("nonsense"); }), ErrorCode::ParseError);
}

TEST(RenderLayout, FixedPointOnDeterministicLayouts) {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    const CaptionSpec spec{"A realistic photo of a garden", "a gray cat", "an orange dog"};
    const Layout l = deterministic_layout(spec, rng(), {});
    const std::string text = render_layout(l);
    const Layout reparsed = parse_layout_response(text);
    EXPECT_EQ(reparsed, l);
    EXPECT_EQ(render_layout(reparsed), text);
  }
}

TEST(RenderLayout, ApostropheCaptionUsesDoubleQuotes) {
  Layout l = scene();
  l.objects[0].caption = "a child's kite";
  const std::string text = render_layout(l);
  EXPECT_NE(text.find("(\"a child's kite\", [3, 122, 212, 250])"), std::string::npos) << text;
  EXPECT_EQ(parse_layout_text(text), l);
}

TEST(ValidateLayout, Examples) {
  EXPECT_TRUE(validate_layout(scene()).empty());
  const Layout overlap{{{"a cat", {0, 0, 100, 100}}, {"a dog", {50, 50, 100, 100}}}, "A garden", {}};
  EXPECT_EQ(validate_layout(overlap), std::vector<Violation>{Violation::Overlap});
  const Layout leak{{{"a tree", {0, 0, 100, 100}}}, "A photo of a tree and a lake", {}};
  EXPECT_EQ(validate_layout(leak), std::vector<Violation>{Violation::ForegroundInBackground});
}

TEST(ValidateLayout, HeadNounOnlyWholeWordCaseInsensitive) {
  const Layout adjective{{{"an orange dog", {0, 0, 100, 100}}}, "An orange sunset", {}};
  EXPECT_TRUE(validate_layout(adjective).empty());
  const Layout partial{{{"a cat", {0, 0, 100, 100}}}, "A catwalk at night", {}};
  EXPECT_TRUE(validate_layout(partial).empty());
  const Layout upper{{{"a cat", {0, 0, 100, 100}}}, "A CAT cafe", {}};
  EXPECT_EQ(validate_layout(upper), std::vector<Violation>{Violation::ForegroundInBackground});
}

TEST(DeriveSourceLayout, RemovesIndexedObject) {
  const Layout two = garden();
  const Layout kept_dog = derive_source_layout(two, 0);
  ASSERT_EQ(kept_dog.objects.size(), 1u);
  EXPECT_EQ(kept_dog.objects[0], two.objects[1]);
  EXPECT_EQ(kept_dog.background_prompt, two.background_prompt);
  const Layout kept_cat = derive_source_layout(two, 1);
  EXPECT_EQ(kept_cat.objects[0], two.objects[0]);
  EXPECT_EQ(two, garden());
}

TEST(DeriveSourceLayout, ArityCheckedBeforeIndex) {
  const Layout one = derive_source_layout(garden(), 0);
  EXPECT_EQ(code_of([&] { derive_source_layout(one, 0); }), ErrorCode::ArityError);
  EXPECT_EQ(code_of([&] { derive_source_layout(one, 5); }), ErrorCode::ArityError);
  EXPECT_EQ(code_of([] { derive_source_layout(garden(), 2); }), ErrorCode::IndexError);
  EXPECT_EQ(code_of([] { derive_source_layout(garden(), -1); }), ErrorCode::IndexError);
}

TEST(EditInstruction, EditInstructionFormatBox) {
  const auto cat_placed = make_edit_instruction(garden(), 0);
  EXPECT_EQ(cat_placed.rendered, "Place a gray cat on the left of an orange dog.");
  EXPECT_EQ(cat_placed.placed_caption, "a gray cat");
  EXPECT_EQ(cat_placed.anchor_caption, "an orange dog");
  EXPECT_EQ(cat_placed.relation, SpatialRelation::Left);
  const auto dog_placed = make_edit_instruction(garden(), 1);
  EXPECT_EQ(dog_placed.rendered, "Place an orange dog on the right of a gray cat.");
  EXPECT_EQ(render_instruction("x", SpatialRelation::Right, "y"), "Place x on the right of y.");
}

TEST(EditInstruction, TieIsNaRelation) {
  const Layout tie{{{"a cat", {100, 0, 50, 50}}, {"a dog", {75, 200, 100, 50}}}, "A garden", {}};
  EXPECT_EQ(code_of([&] { make_edit_instruction(tie, 0); }), ErrorCode::NaRelation);
}

TEST(EditInstruction, ExactlyOneLeftOneRight) {
  Rng rng(23);
  for (int i = 0; i < 300; ++i) {
    const Layout l = deterministic_layout({"A beach", "a red ball", "a blue kite"}, rng(), {});
    const auto a = make_edit_instruction(l, 0);
    const auto b = make_edit_instruction(l, 1);
    EXPECT_NE(a.relation, b.relation);
    EXPECT_EQ(a.placed_caption, l.objects[0].caption);
    EXPECT_EQ(derive_source_layout(l, 0).objects[0].caption, a.anchor_caption);
  }
}

TEST(TrainingTriplet, JsonlGolden) {
  const TrainingTriplet t = make_triplet("rec-000001", scene(), 1, 42);
  EXPECT_EQ(to_jsonl(t),
            R"({"id":"rec-000001","seed":42,"source_layout":{"objects":[["a dog",[3,122,212,250]]],)"
            R"("background":"A realistic photograph of a scene"},"instruction":"Place a tree on the right of a dog.",)"
            R"("target_layout":{"objects":[["a dog",[3,122,212,250]],["a tree",[287,31,220,341]]],)"
            R"("background":"A realistic photograph of a scene"}})");
  EXPECT_EQ(triplet_from_jsonl(to_jsonl(t)), t);
  EXPECT_EQ(t.placed_index(), 1);
}

TEST(TrainingTriplet, ConstructorRejectsBrokenInvariants) {
  const Layout two = scene();
  Layout source = derive_source_layout(two, 1);
  const auto instruction = make_edit_instruction(two, 1);
  EXPECT_NO_THROW(TrainingTriplet("a", source, instruction, two, 1));

  Layout other_background = source;
  other_background.background_prompt = "A lake";
  EXPECT_EQ(code_of([&] { TrainingTriplet("a", other_background, instruction, two, 1); }),
            ErrorCode::ValidationError);

  Layout moved = source;
  moved.objects[0].bbox.x += 1;
  EXPECT_EQ(code_of([&] { TrainingTriplet("a", moved, instruction, two, 1); }), ErrorCode::ValidationError);

  auto flipped = instruction;
  flipped.relation = SpatialRelation::Left;
  flipped.rendered = render_instruction(flipped.placed_caption, flipped.relation, flipped.anchor_caption);
  EXPECT_EQ(code_of([&] { TrainingTriplet("a", source, flipped, two, 1); }), ErrorCode::ValidationError);
}

TEST(TrainingTriplet, JsonlRejectsCorruption) {
  const std::string good = to_jsonl(make_triplet("r", scene(), 0, 3));
  std::string bad_background = good;
  bad_background.replace(bad_background.find("scene"), 5, "beach");
  EXPECT_EQ(code_of([&] { triplet_from_jsonl(bad_background); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { triplet_from_jsonl("{\"id\": 3}"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { triplet_from_jsonl("not json"); }), ErrorCode::SchemaError);
  std::string negative_seed = good;
  negative_seed.replace(negative_seed.find("\"seed\":3"), 8, "\"seed\":-3");
  EXPECT_EQ(code_of([&] { triplet_from_jsonl(negative_seed); }), ErrorCode::SchemaError);
}

TEST(HeadNoun, FinalTokenLowercased) {
  EXPECT_EQ(head_noun("an orange Dog"), "dog");
  EXPECT_EQ(head_noun("a teddy bear."), "bear");
}

}  // namespace
}  // namespace spatial
