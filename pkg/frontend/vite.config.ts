import { defineConfig } from "vite";

export default defineConfig({
  server: {
    port: 5173,
    proxy: {
      // dev server proxies the elicitation API
      "/api": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "node",
    globalSetup: "./tests/server_setup.ts",
    testTimeout: 30000,
    hookTimeout: 120000,
  },
});
