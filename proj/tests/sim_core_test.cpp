#include "vistatest/sim_core.h"

#include <gtest/gtest.h>

TEST(Stub, sim_core) { SUCCEED(); }
