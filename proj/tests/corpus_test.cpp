#include "structkd/corpus.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "structkd/errors.hpp"
#include "structkd/synth.hpp"

namespace structkd {
namespace {

std::vector<std::string> tag_names(const Dataset& d, std::size_t k) {
  std::vector<std::string> out;
  for (int t : d.sentences[k].tags().tags) out.push_back(d.labels.name(t));
  return out;
}

TEST(ReadConllNer, SingleSentence) {
  std::istringstream in("John B-PER\nruns O\n\n");
  const Dataset d = read_conll_ner(in);
  ASSERT_EQ(d.sentences.size(), 1u);
  EXPECT_EQ(d.sentences[0].tokens, (std::vector<std::string>{"John", "runs"}));
  EXPECT_EQ(tag_names(d, 0), (std::vector<std::string>{"B-PER", "O"}));
}

TEST(ReadConllNer, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(read_conll_ner(in).sentences.empty());
}

TEST(ReadConllNer, TwoBlocksAndDocstart) {
  std::istringstream in("-DOCSTART- -X- O O\n\nEU NNP B-ORG\nrejects VBZ O\n\nPeter NNP B-PER\n");
  const Dataset d = read_conll_ner(in);
  ASSERT_EQ(d.sentences.size(), 2u);
  EXPECT_EQ(d.sentences[0].size(), 2);
  EXPECT_EQ(d.sentences[1].size(), 1);
  EXPECT_EQ(tag_names(d, 0)[0], "B-ORG");
}

TEST(ReadConllNer, RaggedColumnsReportLine) {
  std::istringstream in("a NN O\nb O\n");
  try {
    read_conll_ner(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ReadConllu, RootToken) {
  std::istringstream in("1\tran\t_\t_\t_\t_\t0\troot\t_\t_\n\n");
  const Dataset d = read_conllu(in);
  ASSERT_EQ(d.sentences.size(), 1u);
  EXPECT_EQ(d.sentences[0].heads().heads, std::vector<int>{0});
  EXPECT_EQ(d.labels.name(d.sentences[0].heads().rels[0]), "root");
}

TEST(ReadConllu, CommentOnly) {
  std::istringstream in("# sent_id = 1\n# text = nothing\n");
  EXPECT_TRUE(read_conllu(in).sentences.empty());
}

TEST(ReadConllu, TwoTokensSkippingMultiwordAndEmptyNodes) {
  std::istringstream in(
      "# c\n1-2\tthe-dog\t_\t_\t_\t_\t_\t_\t_\t_\n1\tthe\t_\t_\t_\t_\t2\tdet\t_\t_\n"
      "1.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n2\tdog\t_\t_\t_\t_\t0\troot\t_\t_\n");
  const Dataset d = read_conllu(in);
  ASSERT_EQ(d.sentences.size(), 1u);
  EXPECT_EQ(d.sentences[0].heads().heads, (std::vector<int>{2, 0}));
}

TEST(ReadConllu, NonIntegerHeadReportsLine) {
  std::istringstream in("1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\tx\tdep\t_\t_\n");
  try {
    read_conllu(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ReadConllu, SelfHeadRejected) {
  std::istringstream in("1\ta\t_\t_\t_\t_\t1\troot\t_\t_\n");
  EXPECT_THROW(read_conllu(in), ParseError);
}

TEST(WriteRead, ConlluRoundTrip) {
  std::istringstream in("1\tthe\t_\t_\t_\t_\t2\tdet\t_\t_\n2\tdog\t_\t_\t_\t_\t0\troot\t_\t_\n\n");
  const Dataset d = read_conllu(in);
  std::ostringstream out;
  write_conllu(out, d);
  std::istringstream again(out.str());
  const Dataset e = read_conllu(again);
  EXPECT_EQ(e.sentences[0].heads(), d.sentences[0].heads());
  EXPECT_EQ(e.sentences[0].tokens, d.sentences[0].tokens);
}

// Tags of one entity type named X: O=0, B=1, I=2, E=3, S=4.
TEST(SpansToBioes, Examples) {
  EXPECT_EQ(spans_to_bioes(SpanSet{{{1, 1, 0}}}, 3).tags, (std::vector<int>{4, 0, 0}));
  EXPECT_EQ(spans_to_bioes(SpanSet{{{1, 3, 0}}}, 3).tags, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(spans_to_bioes(SpanSet{}, 2).tags, (std::vector<int>{0, 0}));
}

TEST(BioesToSpans, Examples) {
  EXPECT_EQ(bioes_to_spans(TagSequence{{1, 3}}), (SpanSet{{{1, 2, 0}}}));
  EXPECT_EQ(bioes_to_spans(TagSequence{{2, 0}}), SpanSet{});
  EXPECT_EQ(bioes_to_spans(TagSequence{{4, 4}}), (SpanSet{{{1, 1, 0}, {2, 2, 0}}}));
}

TEST(BioesToSpans, DropsUnterminatedAndMixedFragments) {
  EXPECT_EQ(bioes_to_spans(TagSequence{{1, 2}}), SpanSet{});          // B I, never closed
  EXPECT_EQ(bioes_to_spans(TagSequence{{1, 7}}), SpanSet{});          // B-0 E-1
  EXPECT_EQ(bioes_to_spans(TagSequence{{3, 4}}), (SpanSet{{{2, 2, 0}}}));  // stray E
}

TEST(Bioes, RoundTripOnRandomSpanSets) {
  Rng rng(11);
  for (int k = 0; k < 2000; ++k) {
    const int n = 1 + rng.below(12);
    std::vector<Span> spans;
    for (int i = 1; i <= n;) {
      if (rng.below(2) == 0) {
        ++i;
        continue;
      }
      const int end = i + rng.below(n - i + 1);
      spans.push_back({i, end, rng.below(3)});
      i = end + 1;
    }
    const SpanSet s{spans};
    EXPECT_EQ(bioes_to_spans(spans_to_bioes(s, n)), s);
  }
}

TEST(MakeSpanSet, RejectsOverlapAndOutOfRange) {
  EXPECT_THROW(make_span_set({{1, 2, 0}, {2, 3, 0}}, 3), InvariantViolation);
  EXPECT_THROW(make_span_set({{2, 4, 0}}, 3), InvariantViolation);
  EXPECT_EQ(make_span_set({{3, 3, 0}, {1, 2, 1}}, 3), (SpanSet{{{1, 2, 1}, {3, 3, 0}}}));
}

TEST(BioesTransitions, Constraints) {
  EXPECT_TRUE(bioes_transition_allowed(1, 2));
  EXPECT_TRUE(bioes_transition_allowed(1, 3));
  EXPECT_FALSE(bioes_transition_allowed(1, 0));
  EXPECT_FALSE(bioes_transition_allowed(1, 7));  // B-0 then E-1
  EXPECT_TRUE(bioes_transition_allowed(3, 5));
  EXPECT_FALSE(bioes_transition_allowed(0, 2));
  EXPECT_FALSE(bioes_start_allowed(2));
  EXPECT_FALSE(bioes_stop_allowed(1));
  EXPECT_TRUE(bioes_stop_allowed(4));
}

TEST(NormalizeToBioes, Iob1AndIob2) {
  using V = std::vector<std::string>;
  EXPECT_EQ(normalize_to_bioes(V{"I-PER", "I-PER", "O", "I-LOC"}),
            (V{"B-PER", "E-PER", "O", "S-LOC"}));
  EXPECT_EQ(normalize_to_bioes(V{"B-PER", "I-PER", "I-PER", "B-PER"}),
            (V{"B-PER", "I-PER", "E-PER", "S-PER"}));
  EXPECT_EQ(normalize_to_bioes(V{"B-ORG", "I-LOC"}), (V{"S-ORG", "S-LOC"}));
  EXPECT_EQ(normalize_to_bioes(V{"S-ORG", "B-ORG", "E-ORG"}), (V{"S-ORG", "B-ORG", "E-ORG"}));
}

TEST(Canonicalize, BuildsSchemeAndRejectsUnknownTypes) {
  std::istringstream in("John B-PER\nSmith I-PER\nin O\nRome B-LOC\n\n");
  const Dataset raw = read_conll_ner(in);
  BioesScheme scheme;
  const Dataset d = canonicalize_ner(raw, scheme, true);
  EXPECT_EQ(scheme.types().names(), (std::vector<std::string>{"PER", "LOC"}));
  EXPECT_EQ(d.labels, scheme.tag_alphabet());
  EXPECT_EQ(d.sentences[0].tags().tags, (std::vector<int>{1, 3, 0, 8}));

  BioesScheme narrow;
  narrow.add_type("PER");
  EXPECT_THROW(canonicalize_ner(raw, narrow, false), UsageError);
}

TEST(LabelAlphabet, Lookup) {
  LabelAlphabet a;
  EXPECT_EQ(a.add("x"), 0);
  EXPECT_EQ(a.add("y"), 1);
  EXPECT_EQ(a.add("x"), 0);
  EXPECT_EQ(a.id("y"), 1);
  EXPECT_FALSE(a.find("z").has_value());
  EXPECT_THROW(a.id("z"), UsageError);
}

}  // namespace
}  // namespace structkd
