import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { digestContent, imageIdentity, sha256Hex } from "../src/hash.js";

interface Vector {
  user_id: number;
  content: string;
  digest: string;
}

const vectors: Vector[] = JSON.parse(
  readFileSync(fileURLToPath(new URL("./fixtures/hash_vectors.json", import.meta.url)), "utf-8"),
);

describe("digestContent", () => {
  it("matches the backend on all 20 shared vectors, bit for bit", async () => {
    expect(vectors).toHaveLength(20);
    for (const vector of vectors) {
      const digest = await digestContent(vector.user_id, vector.content);
      expect(digest).toBe(vector.digest);
      expect(digest).toMatch(/^[0-9a-f]{64}$/);
    }
  });

  it("is deterministic and user-salted", async () => {
    const first = await digestContent(7, "hello");
    const second = await digestContent(7, "hello");
    const other = await digestContent(8, "hello");
    expect(first).toBe(second);
    expect(other).not.toBe(first);
  });

  it("rejects non-positive user ids", async () => {
    await expect(digestContent(0, "x")).rejects.toThrow();
  });
});

describe("sha256Hex", () => {
  it("hashes raw bytes and strings alike", async () => {
    const fromString = await sha256Hex("7:hello");
    const fromBytes = await sha256Hex(new TextEncoder().encode("7:hello"));
    expect(fromString).toBe(fromBytes);
  });
});

describe("imageIdentity", () => {
  it("stands in for the file path as name plus byte length", () => {
    expect(imageIdentity("IMG_2042.jpg", 48213)).toBe("IMG_2042.jpg:48213");
  });
});
