#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "forgetq/dump_ingest.hpp"
#include "test_util.hpp"

namespace forgetq {
namespace {

using testing::fixture;

Timestamp ts(const char* s) { return *Timestamp::parse(s); }

TEST(Timestamp, ParsesDumpFormats) {
    EXPECT_EQ(ts("2008-07-31T21:42:52.667").iso(), "2008-07-31T21:42:52.667");
    EXPECT_EQ(ts("2008-07-31T21:42:52.667Z"), ts("2008-07-31T21:42:52.667"));
    EXPECT_EQ(ts("2019-09-01"), Timestamp::from_civil(2019, 9, 1));
    EXPECT_EQ(ts("1970-01-01T00:00:01").millis(), 1000);
    EXPECT_EQ(ts("2008-07-31T21:42:52.6").millis() % 1000, 600);
    EXPECT_FALSE(Timestamp::parse("2019-02-30"));
    EXPECT_FALSE(Timestamp::parse("yesterday"));
    EXPECT_FALSE(Timestamp::parse("2019-01-01T10:00:00+02:00"));
    EXPECT_EQ(ts("2019-09-01T12:30:00").compact(), "20190901T123000000Z");
}

TEST(ParsePosts, FixtureMatchesHandWrittenRecords) {
    std::ifstream in(fixture("Posts.xml"));
    ParseStats stats;
    const auto records = parse_posts(in, ts("2020-01-01"), &stats);
    ASSERT_EQ(records.size(), 5u);
    EXPECT_EQ(stats.skipped_other_type, 1u);
    EXPECT_EQ(stats.warning_count, 0u);

    QuestionRecord q4;
    q4.id = 4;
    q4.creation_date = ts("2008-07-31T21:42:52.667");
    q4.score = 573;
    q4.view_count = 710;
    q4.body_html = "<p>How do I convert a <code>double</code> to an int?</p>\n";
    q4.title = "Convert Decimal to Double & back";
    q4.tags = {"java", "android"};
    q4.answer_count = 2;
    q4.comment_count = 1;
    q4.favorite_count = 41;
    q4.accepted_answer_id = 7;
    q4.owner_user_id = 8;
    q4.last_activity_date = ts("2019-07-19T01:39:54.173");
    ASSERT_TRUE(std::holds_alternative<QuestionRecord>(records[0]));
    EXPECT_EQ(std::get<QuestionRecord>(records[0]), q4);

    const auto& q6 = std::get<QuestionRecord>(records[1]);
    EXPECT_EQ(q6.id, 6u);
    EXPECT_EQ(q6.view_count, 16306);
    EXPECT_EQ(q6.tags, (std::vector<std::string>{"html", "css", "internet-explorer-7"}));
    EXPECT_FALSE(q6.accepted_answer_id);
    EXPECT_EQ(q6.closed_date, ts("2012-01-01"));
    EXPECT_EQ(q6.favorite_count, 0);

    AnswerRecord a7;
    a7.id = 7;
    a7.parent_question_id = 4;
    a7.creation_date = ts("2008-07-31T22:17:57.883");
    a7.score = 404;
    a7.comment_count = 0;
    a7.body_html = "<p>An explicit cast to double</p>";
    a7.last_activity_date = ts("2019-10-21T14:03:54.607");
    a7.owner_user_id = 9;
    EXPECT_EQ(std::get<AnswerRecord>(records[2]), a7);

    const auto& q9 = std::get<QuestionRecord>(records[3]);
    EXPECT_EQ(q9.tags, (std::vector<std::string>{"c#", ".net"}));
    EXPECT_EQ(q9.view_count, 0);
    EXPECT_FALSE(q9.owner_user_id);

    const auto& a12 = std::get<AnswerRecord>(records[4]);
    EXPECT_EQ(a12.score, -2);
    EXPECT_EQ(a12.body_html, "It's \"fine\"");
    EXPECT_EQ(a12.comment_count, 5);
}

TEST(ParsePosts, EmptyRowsSection) {
    std::istringstream in("<?xml version=\"1.0\"?>\n<posts>\n</posts>\n");
    ParseStats stats;
    EXPECT_TRUE(parse_posts(in, std::nullopt, &stats).empty());
    EXPECT_EQ(stats.warning_count, 0u);
    std::istringstream empty("");
    EXPECT_TRUE(parse_posts(empty, std::nullopt, &stats).empty());
}

TEST(ParsePosts, MalformedRowsAreSkippedWithOffsets) {
    const std::string good =
        R"(<row Id="1" PostTypeId="1" CreationDate="2010-01-01T00:00:00" Tags="&lt;a&gt;" />)";
    const std::string doc = "<posts>\n" + good + "\n" +
                            R"(<row Id="2" PostTypeId="1" CreationDate=2010 />)" + "\n" +
                            R"(<row PostTypeId="1" CreationDate="2010-01-01T00:00:00" Tags="&lt;a&gt;" />)" + "\n" +
                            R"(<row Id="3" PostTypeId="1" CreationDate="not-a-date" Tags="&lt;a&gt;" />)" + "\n" +
                            R"(<row Id="4" PostTypeId="1" CreationDate="2010-01-01T00:00:00" Tags="&bogus;" />)" + "\n" +
                            good + "\n</posts>";
    std::istringstream in(doc);
    ParseStats stats;
    const auto records = parse_posts(in, std::nullopt, &stats);
    EXPECT_EQ(records.size(), 2u);
    ASSERT_EQ(stats.warning_count, 4u);
    const std::size_t second_row = doc.find("<row Id=\"2\"");
    EXPECT_EQ(stats.warnings[0].offset, second_row);
    EXPECT_NE(stats.warnings[1].message.find("Id"), std::string::npos);
    EXPECT_NE(stats.warnings[2].message.find("timestamp"), std::string::npos);

    std::istringstream again(doc);
    ParseOptions strict;
    strict.strict = true;
    EXPECT_THROW(parse_posts(again, std::nullopt, nullptr, strict), ParseError);
}

TEST(ParsePosts, RecordsAfterDumpTimeAreRejected) {
    std::ifstream in(fixture("Posts.xml"));
    ParseStats stats;
    const auto records = parse_posts(in, ts("2008-07-31T22:10:00"), &stats);
    EXPECT_EQ(records.size(), 2u);
    EXPECT_EQ(stats.warning_count, 3u);
}

TEST(ParsePosts, SmallChunksGiveIdenticalResults) {
    std::ifstream a(fixture("Posts.xml"));
    const auto big = parse_posts(a, std::nullopt);
    for (std::size_t chunk : {64u, 97u, 300u}) {
        std::ifstream b(fixture("Posts.xml"));
        ParseOptions opts;
        opts.chunk_bytes = chunk;
        EXPECT_EQ(parse_posts(b, std::nullopt, nullptr, opts), big) << chunk;
    }
}

TEST(ParsePosts, EntityRoundTripOnRandomBodies) {
    std::mt19937_64 rng(7);
    const std::string alphabet = "ab <>&\"'\n\t\r;#xé";
    for (int trial = 0; trial < 200; ++trial) {
        std::string body;
        const int len = static_cast<int>(rng() % 40);
        for (int i = 0; i < len; ++i) body += alphabet[rng() % alphabet.size()];
        const std::string doc = "<posts><row Id=\"1\" PostTypeId=\"2\" ParentId=\"5\" "
                                "CreationDate=\"2010-01-01T00:00:00\" Body=\"" +
                                xml::escape_attribute(body) + "\" /></posts>";
        std::istringstream in(doc);
        const auto records = parse_posts(in, std::nullopt);
        ASSERT_EQ(records.size(), 1u);
        EXPECT_EQ(std::get<AnswerRecord>(records[0]).body_html, body);
    }
}

TEST(SplitTags, BothDumpEras) {
    EXPECT_EQ(split_tags("<java><Android>"), (std::vector<std::string>{"java", "android"}));
    EXPECT_EQ(split_tags("java|android"), (std::vector<std::string>{"java", "android"}));
    EXPECT_EQ(split_tags("|c++|"), (std::vector<std::string>{"c++"}));
    EXPECT_TRUE(split_tags("").empty());
}

TEST(ParseUsers, FixtureExactMatch) {
    std::ifstream in(fixture("Users.xml"));
    ParseStats stats;
    const auto users = parse_users(in, &stats);
    ASSERT_EQ(users.size(), 4u);
    EXPECT_EQ(users[0], (UserRecord{1, 44300, 408587, 3386, 1316, ts("2008-07-31T14:22:31.287")}));
    EXPECT_EQ(users[1], (UserRecord{2, 3768, 25000, 663, 88, ts("2008-07-31T14:22:31.287")}));
    EXPECT_EQ(users[2], (UserRecord{8, 0, 0, 0, 0, ts("2008-07-31T21:33:24.057")}));
    EXPECT_EQ(users[3], (UserRecord{9, 101, 12, 5, 1, ts("2008-07-31T21:35:26.517")}));
    EXPECT_EQ(stats.warning_count, 0u);
}

TEST(ParseUsers, MissingIdIsSkipped) {
    std::istringstream in(R"(<users><row Reputation="1" Views="0" UpVotes="0" DownVotes="0" /></users>)");
    ParseStats stats;
    EXPECT_TRUE(parse_users(in, &stats).empty());
    EXPECT_EQ(stats.warning_count, 1u);
}

TEST(ParseTags, FixtureAndNormalization) {
    std::ifstream in(fixture("Tags.xml"));
    const auto tags = parse_tags(in);
    ASSERT_EQ(tags.size(), 3u);
    EXPECT_EQ(tags[0], (TagRecord{"java", 12}));
    EXPECT_EQ(tags[1], (TagRecord{"html", 3}));
    EXPECT_EQ(tags[2], (TagRecord{"c#", 0}));
    std::istringstream empty("");
    EXPECT_TRUE(parse_tags(empty).empty());
}

TEST(RowReader, BufferStaysBoundedOnLongInput) {
    // 20k rows through a 4 KiB chunk: the buffer must not track input length.
    std::string doc = "<posts>\n";
    for (int i = 1; i <= 20000; ++i) {
        doc += "<row Id=\"" + std::to_string(i) +
               "\" PostTypeId=\"2\" ParentId=\"1\" CreationDate=\"2010-01-01T00:00:00\" Body=\"x\" />\n";
    }
    doc += "</posts>\n";
    std::istringstream in(doc);
    ParseOptions opts;
    opts.chunk_bytes = 4096;
    PostReader reader(in, std::nullopt, opts);
    std::size_t n = 0;
    while (reader.next()) ++n;
    EXPECT_EQ(n, 20000u);
    EXPECT_LE(reader.peak_buffer_bytes(), 3 * 4096u);
}

}  // namespace
}  // namespace forgetq
