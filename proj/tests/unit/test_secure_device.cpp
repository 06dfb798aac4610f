#include <gtest/gtest.h>

#include "ringsim/runtime.hpp"
#include "ringsim/secure_device.hpp"

using namespace ringsim;

namespace {

std::vector<std::byte> seq(std::initializer_list<int> v) {
    std::vector<std::byte> out;
    for (int x : v) out.push_back(std::byte(x));
    return out;
}

}  // namespace

TEST(SecureDevice, EmptyReadReturnsNothing) {
    SecureSerialDevice d(64, {});
    EXPECT_TRUE(d.read(16).empty());
    EXPECT_EQ(d.rx_pending(), 0u);
}

TEST(SecureDevice, ReadsDrainInArrivalOrder) {
    SecureSerialDevice d(64, {});
    d.inject_rx(seq({1, 2, 3, 4, 5}));
    EXPECT_EQ(d.read(3), seq({1, 2, 3}));
    EXPECT_EQ(d.rx_pending(), 2u);
    EXPECT_EQ(d.read(10), seq({4, 5}));
    EXPECT_TRUE(d.read(10).empty());
    EXPECT_TRUE(d.read(0).empty());
}

TEST(SecureDevice, WritesFillUpToCapacity) {
    SecureSerialDevice d(8, {});
    EXPECT_EQ(*d.write(seq({1, 2, 3, 4, 5}), 10, 1), 5u);
    EXPECT_EQ(d.write(seq({6, 7, 8, 9}), 20, 2).error(), Errc::DeviceFull);
    EXPECT_EQ(*d.write(seq({6, 7, 8}), 30, 2), 3u);
    ASSERT_EQ(d.tx_log().size(), 2u);
    EXPECT_EQ(d.tx_log()[0], (TxRecord{seq({1, 2, 3, 4, 5}), 10, 1}));
    EXPECT_EQ(d.tx_log()[1], (TxRecord{seq({6, 7, 8}), 30, 2}));
    EXPECT_EQ(d.tx_bytes(), 8u);
}

TEST(SecureDevice, DigestCoversLogAndBacklog) {
    SecureSerialDevice a(64, {}), b(64, {});
    (void)a.write(seq({1}), 5, 1);
    (void)b.write(seq({1}), 5, 1);
    EXPECT_EQ(a.digest(), b.digest());
    (void)b.write(seq({2}), 6, 1);
    EXPECT_NE(a.digest(), b.digest());
    a.inject_rx(seq({9}));
    SecureSerialDevice c(64, {});
    (void)c.write(seq({1}), 5, 1);
    EXPECT_NE(a.digest(), c.digest());
}

TEST(SecureDevice, RegistersAreUnreachableFromNormalWorld) {
    Runtime rt(RuntimeConfig{});
    const auto& mmio = rt.kernel().device(0).mmio_pages();
    ASSERT_FALSE(mmio.empty());
    for (const auto pg : mmio) {
        EXPECT_FALSE(rt.world().access_physical(World::Normal, pg.index * kPageSize, 8, AccessMode::Read).ok());
        EXPECT_TRUE(rt.world().access_physical(World::Trusted, pg.index * kPageSize, 8, AccessMode::Read).ok());
    }
}
