import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // integration tests train for minutes; per-test timeouts set inline
    hookTimeout: 120_000,
    pool: "forks",
  },
});
