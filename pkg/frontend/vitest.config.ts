import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'happy-dom',
    include: ['tests/**/*.test.ts'],
    testTimeout: 60_000,
    hookTimeout: 120_000,
    // The e2e suite drives one live server; keep files sequential so unit
    // suites cannot race it for the port.
    fileParallelism: false,
  },
});
