#include <gtest/gtest.h>

TEST(Stub, cli) { SUCCEED(); }
