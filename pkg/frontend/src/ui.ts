/**
 * Minimal DOM rendering for the three-screen flow. All state lives in the
 * ParticipantFlow machine; this module only draws it and forwards events.
 */

import { ApiClient } from "./api.js";
import { ParticipantFlow, PostType, Session } from "./flow.js";

const POST_TYPES: PostType[] = ["feed", "story", "direct"];

export function mountApp(root: HTMLElement, client: ApiClient): void {
  root.innerHTML = `
    <div id="auth" class="card">
      <h2>Welcome</h2>
      <input id="username" placeholder="username (pseudonym)" autocomplete="username">
      <input id="password" type="password" placeholder="password" autocomplete="current-password">
      <select id="variant"><option value="V1">V1</option><option value="V2" selected>V2</option></select>
      <select id="language"><option value="EN" selected>EN</option><option value="DE">DE</option></select>
      <button id="register">Register</button>
      <button id="login">Log in</button>
      <p id="auth-note" class="note"></p>
    </div>
    <div id="app"></div>
  `;
  const authNote = byId("auth-note");

  byId<HTMLButtonElement>("register").onclick = async () => {
    try {
      const username = value("username");
      const result = await client.register(
        username, value("password"),
        value("variant") as "V1" | "V2", value("language") as "EN" | "DE",
      );
      // The account id is needed locally for content hashing.
      localStorage.setItem(`nudgelab:uid:${username}`, String(result.user_id));
      authNote.textContent =
        `Registered. Your registration code: ${result.registration_code}. Now log in.`;
    } catch (error) {
      authNote.textContent = String(error);
    }
  };

  byId<HTMLButtonElement>("login").onclick = async () => {
    try {
      const username = value("username");
      const { session_token } = await client.login(username, value("password"));
      const stored = localStorage.getItem(`nudgelab:uid:${username}`)
        ?? prompt("Your numeric user id (from registration):")
        ?? "";
      const session: Session = { sessionToken: session_token, userId: Number(stored) };
      byId("auth").style.display = "none";
      startFlow(byId("app"), client, session);
    } catch (error) {
      authNote.textContent = String(error);
    }
  };
}

function startFlow(container: HTMLElement, client: ApiClient, session: Session): void {
  const flow = new ParticipantFlow(client, session);

  const render = (): void => {
    switch (flow.screen) {
      case "compose":
        container.innerHTML = `
          <div class="card">
            <h2>New post</h2>
            ${flow.notice ? `<p class="note">${flow.notice.message}</p>` : ""}
            <input id="image" type="file" accept="image/*">
            <p id="image-name" class="note">${flow.image ? flow.image.name : "no image selected"}</p>
            <textarea id="caption" placeholder="Write a caption...">${flow.caption}</textarea>
            <button id="share" ${flow.canShare() ? "" : "disabled"}>SHARE!</button>
          </div>`;
        byId<HTMLInputElement>("image").onchange = (event) => {
          const file = (event.target as HTMLInputElement).files?.[0];
          if (file) {
            flow.selectImage({ name: file.name, byteLength: file.size });
          }
          render();
        };
        byId<HTMLTextAreaElement>("caption").oninput = (event) => {
          flow.setCaption((event.target as HTMLTextAreaElement).value);
          byId<HTMLButtonElement>("share").disabled = !flow.canShare();
        };
        byId<HTMLButtonElement>("share").onclick = async () => {
          await flow.submitShare();
          render();
        };
        break;
      case "popup": {
        const popup = flow.popup;
        container.innerHTML = `
          <div class="card popup">
            <h2>${popup?.legend ?? ""}</h2>
            ${popup?.factText
              ? `<h3>Fact of the day #${popup.factNumber}</h3><p>${popup.factText}</p>`
              : ""}
            <button id="edit">EDIT</button>
            <button id="post">POST</button>
          </div>`;
        byId<HTMLButtonElement>("edit").onclick = async () => {
          await flow.choosePopupAction("edit");
          render();
        };
        byId<HTMLButtonElement>("post").onclick = async () => {
          await flow.choosePopupAction("post");
          render();
        };
        break;
      }
      case "postType":
        container.innerHTML = `
          <div class="card">
            <h2>Share as</h2>
            ${POST_TYPES.map((t) => `<button data-type="${t}">${t}</button>`).join(" ")}
          </div>`;
        for (const button of Array.from(container.querySelectorAll("button"))) {
          button.onclick = () => {
            flow.choosePostType(button.dataset.type as PostType);
            render();
          };
        }
        break;
      case "confirmation":
        container.innerHTML = `
          <div class="card">
            <h2>Handed off</h2>
            <p>Your ${flow.chosenPostType} post was handed over (simulated).</p>
            <button id="again">New post</button>
          </div>`;
        byId<HTMLButtonElement>("again").onclick = () => {
          flow.startOver();
          render();
        };
        break;
      case "login":
        container.innerHTML = `<div class="card"><p>Session expired; reload to log in again.</p></div>`;
        break;
    }
  };

  render();
}

function byId<T extends HTMLElement = HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) {
    throw new Error(`missing element #${id}`);
  }
  return element as T;
}

function value(id: string): string {
  return byId<HTMLInputElement>(id).value;
}
