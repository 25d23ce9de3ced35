#include <doctest.h>

#include <nlohmann/json.hpp>
#include <set>

#include "itcl/task_stream.hpp"

using namespace itcl;

namespace {

LabeledDataset toy_dataset(int classes, int per_class) {
    return make_synthetic_dataset(classes, per_class, {1, 6, 6}, 42);
}

} // namespace

TEST_CASE("class-incremental split: 100/10 and 45/9 shapes, disjointness") {
    for (const auto& [classes, tasks] : {std::pair{100, 10}, std::pair{45, 9}}) {
        LabeledDataset ds = toy_dataset(classes, 2);
        TaskStream s = build_class_incremental_stream(ds, tasks, 7);
        CHECK(s.num_sessions() == tasks);
        std::set<int> all;
        for (const SessionSpec& spec : s.sessions) {
            CHECK(static_cast<int>(spec.class_ids.size()) == classes / tasks);
            for (int c : spec.class_ids) CHECK(all.insert(c).second); // pairwise disjoint
        }
        CHECK(static_cast<int>(all.size()) == classes);
    }
}

TEST_CASE("class-incremental split failures") {
    CHECK_THROWS_AS(build_class_incremental_stream(toy_dataset(10, 2), 3, 0), NonDivisibleSplit);
    LabeledDataset empty;
    empty.class_names = {"a", "b"};
    CHECK_THROWS_AS(build_class_incremental_stream(empty, 2, 0), EmptyDataset);
}

TEST_CASE("single-task split is the identity protocol") {
    TaskStream s = build_class_incremental_stream(toy_dataset(4, 3), 1, 3);
    CHECK(s.num_sessions() == 1);
    CHECK(s.sessions[0].class_ids == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("sample-level disjointness and reproducibility") {
    LabeledDataset ds = toy_dataset(6, 10);
    TaskStream a = build_class_incremental_stream(ds, 3, 99);
    TaskStream b = build_class_incremental_stream(ds, 3, 99);
    std::set<int> seen;
    for (int j = 1; j <= 3; ++j) {
        for (const Sample& smp : a.session_data(j).train) CHECK(seen.insert(smp.id).second);
        for (const Sample& smp : a.session_data(j).test) CHECK(seen.insert(smp.id).second);
        CHECK(a.sessions[j - 1].class_ids == b.sessions[j - 1].class_ids);
        CHECK(a.session_data(j).train.size() == b.session_data(j).train.size());
        for (size_t i = 0; i < a.session_data(j).train.size(); ++i)
            CHECK(a.session_data(j).train[i].id == b.session_data(j).train[i].id);
    }
    TaskStream c = build_class_incremental_stream(ds, 3, 100);
    bool same = true;
    for (int j = 1; j <= 3 && same; ++j)
        same = a.sessions[j - 1].class_ids == c.sessions[j - 1].class_ids;
    CHECK_FALSE(same); // different seed, different partition
}

TEST_CASE("domain-incremental stream: shared label space enforced") {
    std::vector<LabeledDataset> domains;
    for (int d = 0; d < 3; ++d)
        domains.push_back(make_synthetic_dataset(4, 5, {1, 6, 6}, 10 + d, d));
    TaskStream s = build_domain_incremental_stream(domains);
    CHECK(s.mode == StreamMode::domain_incremental);
    CHECK(s.num_sessions() == 3);
    for (const SessionSpec& spec : s.sessions)
        CHECK(spec.class_ids == std::vector<int>{0, 1, 2, 3});

    SUBCASE("missing class") {
        std::vector<LabeledDataset> bad = domains;
        std::erase_if(bad[1].samples, [](const Sample& smp) { return smp.label == 2; });
        CHECK_THROWS_AS(build_domain_incremental_stream(bad), LabelSpaceMismatch);
    }
    SUBCASE("different class list") {
        std::vector<LabeledDataset> bad = domains;
        bad[2].class_names[0] = "other";
        CHECK_THROWS_AS(build_domain_incremental_stream(bad), LabelSpaceMismatch);
    }
    SUBCASE("single domain degenerates") {
        TaskStream one = build_domain_incremental_stream({domains[0]});
        CHECK(one.num_sessions() == 1);
    }
}

TEST_CASE("synthetic stream counts and determinism") {
    TaskStream s = make_synthetic_stream(2, 3, 50, {3, 32, 32}, 0);
    CHECK(s.num_sessions() == 2);
    CHECK(s.total_classes == 6);
    size_t train = 0, test = 0;
    for (int j = 1; j <= 2; ++j) {
        train += s.session_data(j).train.size();
        test += s.session_data(j).test.size();
    }
    CHECK(train == 240);
    CHECK(test == 60);

    TaskStream tiny = make_synthetic_stream(1, 2, 10, {1, 8, 8}, 1);
    CHECK(tiny.session_data(1).train.size() == 16);
    CHECK(tiny.session_data(1).test.size() == 4);

    TaskStream again = make_synthetic_stream(2, 3, 50, {3, 32, 32}, 0);
    for (int j = 1; j <= 2; ++j) {
        const auto& a = s.session_data(j).train;
        const auto& b = again.session_data(j).train;
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].id == b[i].id);
            CHECK(a[i].image.data == b[i].image.data); // bit-identical
        }
    }
}

TEST_CASE("stream descriptor json") {
    TaskStream s = make_synthetic_stream(2, 2, 10, {1, 6, 6}, 5);
    const auto j = nlohmann::json::parse(stream_descriptor_json(s));
    CHECK(j.at("mode") == "class_incremental");
    CHECK(j.at("total_classes") == 4);
    CHECK(j.at("sessions").size() == 2);
    CHECK(j.at("sessions")[0].contains("train_checksum"));
    CHECK(j.at("sessions")[0].at("train_count") == 16);
}

TEST_CASE("multisource and domain-incremental synthetic makers") {
    TaskStream ms = make_synthetic_multisource_stream(2, 3, 10, {3, 12, 12}, 4);
    CHECK(ms.mode == StreamMode::class_incremental);
    CHECK(ms.total_classes == 6);
    CHECK(ms.sessions[0].class_ids == std::vector<int>{0, 1, 2});
    CHECK(ms.sessions[1].class_ids == std::vector<int>{3, 4, 5});
    for (const Sample& smp : ms.session_data(2).train) CHECK(smp.label >= 3);

    TaskStream di = make_synthetic_domain_incremental_stream(2, 4, 10, {3, 12, 12}, 4);
    CHECK(di.mode == StreamMode::domain_incremental);
    CHECK(di.total_classes == 4);
    CHECK(di.num_sessions() == 2);
}

TEST_CASE("joint merge pools every session") {
    TaskStream s = make_synthetic_stream(3, 2, 10, {1, 6, 6}, 9);
    TaskStream joint = merge_stream_for_joint(s);
    CHECK(joint.num_sessions() == 1);
    CHECK(joint.sessions[0].class_ids.size() == 6);
    CHECK(joint.session_data(1).train.size() == 3 * 2 * 8);
}
