"""Dialogue manager and dialogue stack.

Incoming chat flows: profanity gate, then the semantic parser, then a
dialogue object chosen by the dictionary's dialogue type. Multi-turn
exchanges (clarification questions) live on a LIFO stack: only the top
object sees incoming chat, and a finished object is popped before control
returns, handing its result to the object beneath it.
"""
from __future__ import annotations

import logging

from . import parser as parsing

log = logging.getLogger(__name__)

REPLY_PROFANITY = "please don 't use that language"
REPLY_CONFUSED = "sorry , i didn 't understand that"


class DialogueObject:
    kind = "object"

    def __init__(self):
        self.finished = False
        self.awaiting = False  # blocked until the user replies
        self.result = None

    def step(self, ctx: "DialogueCtx") -> None:
        raise NotImplementedError

    def child_done(self, child: "DialogueObject") -> None:
        pass

    def receive_chat(self, speaker: str, text: str) -> bool:
        """Offer an incoming chat to this object; True when consumed."""
        return False

    def __repr__(self):
        state = "finished" if self.finished else ("awaiting" if self.awaiting else "active")
        return f"<{type(self).__name__} {state}>"


class Say(DialogueObject):
    kind = "Say"

    def __init__(self, text: str):
        super().__init__()
        self.text = text

    def step(self, ctx) -> None:
        ctx.say(self.text)
        self.finished = True


class AwaitResponse(DialogueObject):
    """Blocks until exactly one chat arrives; that chat becomes its result."""

    kind = "AwaitResponse"

    def step(self, ctx) -> None:
        if self.result is not None:
            self.finished = True
        else:
            self.awaiting = True

    def receive_chat(self, speaker: str, text: str) -> bool:
        if self.result is not None:
            return False
        self.result = (speaker, text)
        self.awaiting = False
        return True


class ConfirmReferenceObject(DialogueObject):
    """Ask which of several candidate referents was meant.

    Resolves on an ordinal ("1", "the second one"), "yes" (the nearest
    candidate, listed first), or "no" (cancel). Anything else cancels the
    clarification and is re-dispatched as a fresh chat.
    """

    kind = "ConfirmReferenceObject"
    _ORDINALS = {"first": 1, "second": 2, "third": 3, "one": 1, "two": 2, "three": 3}

    def __init__(self, question: str, candidates: list):
        super().__init__()
        self.question = question
        self.candidates = candidates
        self._phase = "ask"
        self.cancelled = False

    def step(self, ctx) -> None:
        if self._phase == "ask":
            self._phase = "await"
            ctx.push(Say(self.question))
        elif self._phase == "await":
            self._phase = "resolve"
            ctx.push(AwaitResponse())
        # the resolve phase runs from child_done

    def child_done(self, child: DialogueObject) -> None:
        if isinstance(child, AwaitResponse) and self._phase == "resolve":
            self._resolve(*child.result)

    def _resolve(self, speaker: str, text: str) -> None:
        tokens = [t for t in parsing.tokenize(text) if not parsing.is_punct(t)]
        choice = None
        for tok in tokens:
            if tok.isdigit():
                choice = int(tok)
                break
            if tok in self._ORDINALS:
                choice = self._ORDINALS[tok]
                break
        if choice is None and "yes" in tokens:
            choice = 1
        if choice is not None and 1 <= choice <= len(self.candidates):
            self.result = self.candidates[choice - 1]
            self.finished = True
            return
        self.cancelled = True
        self.finished = True
        if "no" not in tokens:
            # not an answer at all: let the manager reparse it as a new chat
            self.reparse = (speaker, text)

    def receive_chat(self, speaker: str, text: str) -> bool:
        return False  # the AwaitResponse child consumes the reply


class DialogueStack:
    def __init__(self):
        self.objects: list[DialogueObject] = []

    def __len__(self):
        return len(self.objects)

    def top(self) -> DialogueObject | None:
        return self.objects[-1] if self.objects else None

    def push(self, obj: DialogueObject) -> None:
        self.objects.append(obj)

    def pop(self) -> DialogueObject:
        return self.objects.pop()


class DialogueCtx:
    """What a dialogue object may touch while stepping."""

    def __init__(self, manager: "DialogueManager", speaker: str):
        self.manager = manager
        self.assistant = manager.assistant
        self.speaker = speaker
        self.replies: list[str] = []

    def say(self, text: str) -> None:
        self.replies.append(text)
        self.assistant.say(text)

    def push(self, obj: DialogueObject) -> None:
        self.manager.stack.push(obj)

    def push_task(self, task) -> None:
        self.assistant.push_task(task)

    def request_reparse(self, speaker: str, text: str) -> None:
        self.manager._reparse_request = (speaker, text)


class DialogueManager:
    def __init__(self, assistant, grammar=None, profanity=None):
        from .interpreter import GetMemoryHandler, Interpreter, PutMemoryHandler

        self.assistant = assistant
        self.grammar = grammar or parsing.Grammar.default()
        self.profanity = profanity if profanity is not None else parsing.default_profanity()
        self.stack = DialogueStack()
        self.parse_count = 0
        self.chats_handled = 0
        self._reparse_request = None
        self._handlers = {
            "HUMAN_GIVE_COMMAND": Interpreter,
            "GET_MEMORY": GetMemoryHandler,
            "PUT_MEMORY": PutMemoryHandler,
        }

    def handle_chat(self, speaker: str, text: str) -> list[str]:
        """Route one chat line; returns the replies it produced."""
        ctx = DialogueCtx(self, speaker)
        self.chats_handled += 1
        tokens = parsing.tokenize(text)
        if any(t in self.profanity for t in tokens):
            ctx.say(REPLY_PROFANITY)
            return ctx.replies
        self.assistant.memory.record_chat(speaker, text, self.assistant.step_no)
        top = self.stack.top()
        if top is not None and top.receive_chat(speaker, text):
            self._run_stack(ctx)
        else:
            self._dispatch(ctx, speaker, text, tokens)
        # a cancelled clarification hands the text back as a fresh command
        if self._reparse_request is not None:
            rp_speaker, rp_text = self._reparse_request
            self._reparse_request = None
            self._dispatch(ctx, rp_speaker, rp_text, parsing.tokenize(rp_text))
        return ctx.replies

    def _dispatch(self, ctx: DialogueCtx, speaker: str, text: str, tokens: list[str]) -> None:
        self.parse_count += 1
        dictionary = parsing.parse([text], self.grammar)
        dt = dictionary.get("dialogue_type")
        handler = self._handlers.get(dt)
        if handler is None:  # NOOP
            words = [t for t in tokens if not parsing.is_punct(t)]
            if words and words[0] in self.grammar.first_words():
                ctx.say(REPLY_CONFUSED)
            return
        sentences = parsing.tokenize_dialogue([text])
        self.stack.push(handler(dictionary, sentences, speaker))
        self._run_stack(ctx)

    def _run_stack(self, ctx: DialogueCtx) -> None:
        """Step the top object until the stack empties or blocks on the user."""
        guard = 0
        while self.stack.objects:
            top = self.stack.top()
            if top.awaiting:
                return
            if not top.finished:
                top.step(ctx)
                guard += 1
                if guard > 100:
                    log.error("dialogue stack failed to settle; clearing")
                    self.stack.objects.clear()
                    return
            if top.finished:
                self.stack.objects.remove(top)
                if getattr(top, "reparse", None) is not None:
                    ctx.request_reparse(*top.reparse)
                parent = self.stack.top()
                if parent is not None:
                    parent.child_done(top)
