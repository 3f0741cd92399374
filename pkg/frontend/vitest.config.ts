import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // The equivalence suite drives a 20-trial session against a real
    // server process, so individual tests can legitimately take a while.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
