#include "vdn/error.hpp"
#include "vdn/gradcheck.hpp"
#include "vdn/model.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <random>

using namespace vdn;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("vdn_test_" + name);
}

ModelConfig small_config() {
    ModelConfig c;
    c.input_width = 32;
    c.input_height = 16;
    c.encoder_channels = {4, 4, 8, 8};
    c.deconv_channels = {4, 4, 4};
    return c;
}

}  // namespace

TEST(ModelConfig, DefaultLambdaIsQuarter) {
    ModelConfig c;
    EXPECT_DOUBLE_EQ(c.lambda(), 0.25);
    EXPECT_EQ(c.map_width(), 32u);
    EXPECT_EQ(c.map_height(), 32u);
}

TEST(ModelConfig, RejectsInconsistentSettings) {
    ModelConfig c;
    c.deconv_channels = {8, 8};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.input_width = 100;  // not a multiple of 32
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.encoder_channels = {8, 8};  // lambda would be 2
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ModelConfig, JsonRoundTripAndUnknownKeys) {
    const ModelConfig c = small_config();
    const nlohmann::json j = c;
    EXPECT_EQ(j.get<ModelConfig>(), c);
    nlohmann::json bad = j;
    bad["dropout"] = 0.5;
    EXPECT_THROW(bad.get<ModelConfig>(), std::invalid_argument);
    bad = j;
    bad["lambda"] = 0.25;  // inconsistent with 4 encoder stages
    EXPECT_THROW(bad.get<ModelConfig>(), std::invalid_argument);
}

TEST(Model, DefaultParameterCount) {
    // encoder 3x3 convs + affine, three 4x4 deconvs + affine, two 1x1 heads
    const std::size_t enc = (3 * 8 * 9 + 8 + 16) + (8 * 16 * 9 + 16 + 32) + (16 * 32 * 9 + 32 + 64) +
                            2 * (32 * 32 * 9 + 32 + 64);
    const std::size_t dec = 3 * (32 * 32 * 16 + 32 + 64);
    const std::size_t heads = (32 + 1) + (32 * 2 + 2);
    EXPECT_EQ(enc + dec + heads, 74307u);
    EXPECT_EQ(VdnModel(ModelConfig{}).count_params(), 74307u);
}

TEST(Model, ForwardShapesAndTanhRange) {
    const ModelConfig c = small_config();
    const VdnModel m(c, 3);
    std::mt19937_64 rng(9);
    const ModelOutput o = m.forward(Tensor::uniform({2, 3, 16, 32}, rng, 0.0, 1.0));
    EXPECT_EQ(o.heatmap.shape(), (Shape{2, 1, 8, 16}));
    EXPECT_EQ(o.scalarmap.shape(), (Shape{2, 2, 8, 16}));
    for (double v : o.scalarmap.value().values()) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Model, RejectsWrongInputSize) {
    const VdnModel m(small_config());
    std::mt19937_64 rng(1);
    EXPECT_THROW(m.forward(Tensor::uniform({1, 3, 16, 16}, rng, 0, 1)), ShapeError);
    EXPECT_THROW(m.forward(Tensor::uniform({1, 1, 16, 32}, rng, 0, 1)), ShapeError);
}

TEST(Model, SeededInitIsDeterministic) {
    const VdnModel a(small_config(), 11), b(small_config(), 11), c(small_config(), 12);
    for (std::size_t i = 0; i < a.parameters().size(); ++i)
        EXPECT_EQ(a.parameters()[i].value(), b.parameters()[i].value());
    EXPECT_FALSE(a.parameters()[0].value() == c.parameters()[0].value());
    // biases start at zero
    for (double v : a.parameter("enc0.conv.bias").value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Model, EndToEndGradientCheck) {
    for (const GradCheckRow& r : gradcheck_end_to_end(7)) EXPECT_LT(r.rel_error, 1e-3) << r.op << " wrt " << r.wrt;
}

TEST(Checkpoint, SaveLoadRoundTripIsExact) {
    const VdnModel m(small_config(), 5);
    const auto path = temp_path("ckpt.json");
    save(m, path);
    const VdnModel back = load(path);
    EXPECT_EQ(back.config(), m.config());
    ASSERT_EQ(back.parameter_names(), m.parameter_names());
    for (std::size_t i = 0; i < m.parameters().size(); ++i)
        EXPECT_EQ(back.parameters()[i].value(), m.parameters()[i].value());
    nlohmann::json j;
    std::ifstream(path) >> j;
    EXPECT_EQ(j.at("version"), "vdn-ckpt-1");
    std::filesystem::remove(path);
}

TEST(Checkpoint, MismatchLeavesModelUntouched) {
    const VdnModel donor(small_config(), 5);
    const auto path = temp_path("ckpt_mismatch.json");
    save(donor, path);
    ModelConfig other = small_config();
    other.deconv_channels = {4, 4, 6};
    VdnModel target(other, 9);
    const Tensor before = target.parameters()[0].value();
    EXPECT_THROW(load_into(target, path), CheckpointError);
    EXPECT_EQ(target.parameters()[0].value(), before);

    // Truncated file and wrong version.
    { std::ofstream(path) << "{\"version\": \"vdn-ckpt-1\", \"params\": "; }
    EXPECT_THROW(load(path), CheckpointError);
    { std::ofstream(path) << "{\"version\": \"other\"}"; }
    EXPECT_THROW(load(path), CheckpointError);
    std::filesystem::remove(path);
}

TEST(Checkpoint, WrongParameterShapeIsRejected) {
    const VdnModel m(small_config(), 5);
    nlohmann::json j = checkpoint_json(m);
    j["params"]["head_h.bias"]["shape"] = {2};
    j["params"]["head_h.bias"]["values"] = {0.0, 0.0};
    EXPECT_THROW(model_from_json(j), CheckpointError);
}
