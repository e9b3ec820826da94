import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // tf on the pure-JS backend is slow; conv training tests need room
    testTimeout: 120_000,
    hookTimeout: 600_000,
    fileParallelism: false,
  },
});
