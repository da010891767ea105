/**
 * Client-side content pseudonymization.
 *
 * Captions and image identities never leave the device; only these digests
 * cross the wire. The procedure must stay bit-exact with the backend's:
 * SHA-256 over the UTF-8 bytes of `${userId}:${content}`, lowercase hex.
 */

export async function sha256Hex(input: string | Uint8Array): Promise<string> {
  const bytes = typeof input === "string" ? new TextEncoder().encode(input) : input;
  const digest = await crypto.subtle.digest("SHA-256", bytes as BufferSource);
  return Array.from(new Uint8Array(digest))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

export async function digestContent(userId: number, content: string): Promise<string> {
  if (!Number.isInteger(userId) || userId < 1) {
    throw new Error("userId must be a positive integer");
  }
  return sha256Hex(`${userId}:${content}`);
}

/**
 * Browsers do not expose real file paths, so the image identity is the
 * file's name plus its byte length.
 */
export function imageIdentity(name: string, byteLength: number): string {
  return `${name}:${byteLength}`;
}
