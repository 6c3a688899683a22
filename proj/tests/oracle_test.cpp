#include "vistatest/oracle.h"

#include <gtest/gtest.h>

TEST(Stub, oracle) { SUCCEED(); }
