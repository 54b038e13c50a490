n = 0
while True:
    n += 3
    if n > 10:
        break
print(n)
