#include "vistatest/autopilot_bridge.h"

#include <gtest/gtest.h>

TEST(Stub, bridge) { SUCCEED(); }
