import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // Backend-spawning tests wait for a real server process to come up.
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
